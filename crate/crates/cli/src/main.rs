use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Parser, Subcommand};
use potlab_cli::random::random_suite;
use potlab_cli::run::Runtime;
use potlab_cli::{run_suite, write_outputs, Check, Metadata, RunOptions, Status, Suite, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "potlab", version, about = "Run potential-theory verification suites")]
struct Cli {
    /// Print the available checks and exit.
    #[arg(long)]
    list_checks: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a suite file.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "potlab-out")]
        out: PathBuf,
        /// Also dump the sampled fields as JSON.
        #[arg(long)]
        emit_fields: bool,
        /// Tolerance for every scenario, overriding the configured ones.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write a suite of seeded random scenarios for the main inequality.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Lattice spacing.
        #[arg(long, default_value_t = 1.0 / 64.0)]
        h: f64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(config: PathBuf, out: PathBuf, emit_fields: bool, tolerance: Option<f64>, jobs: Option<usize>) -> anyhow::Result<bool> {
    let suite = Suite::load(&config)?;
    if let Some(t) = tolerance {
        anyhow::ensure!(t >= 0.0 && t.is_finite(), "--tolerance must be a nonnegative number");
    }
    let jobs = jobs.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let opts = RunOptions { tolerance, emit_fields };
    let outcomes = pool.install(|| run_suite(&suite, &opts));
    let meta = Metadata {
        tool_version: env!("CARGO_PKG_VERSION"),
        schema_version: SCHEMA_VERSION,
        config: config.display().to_string(),
        started_unix_seconds: started,
        jobs,
        total_runtime_seconds: clock.elapsed().as_secs_f64(),
        runtimes: outcomes
            .iter()
            .map(|o| Runtime { name: o.row.name.clone(), seconds: o.runtime.as_secs_f64() })
            .collect(),
    };
    write_outputs(&out, &outcomes, &meta)?;
    for o in &outcomes {
        let r = &o.row;
        match r.status {
            Status::Error => println!("{:<28} {:<16} error  {}", r.name, r.check, r.error),
            s => println!(
                "{:<28} {:<16} {:<6} margin {:.6e}",
                r.name,
                r.check,
                if s == Status::Pass { "pass" } else { "FAIL" },
                r.margin.unwrap_or(f64::NAN)
            ),
        }
    }
    let failed = outcomes.iter().filter(|o| o.row.status != Status::Pass).count();
    println!("{} scenario(s), {failed} not passing; reports in {}", outcomes.len(), out.display());
    Ok(failed == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.list_checks {
        for c in Check::ALL {
            println!("{:<16} {}", c.name(), c.summary());
        }
        return ExitCode::SUCCESS;
    }
    let result = match cli.command {
        Some(Command::Run { config, out, emit_fields, tolerance, jobs }) => run(config, out, emit_fields, tolerance, jobs),
        Some(Command::Generate { seed, count, h, out }) => (|| {
            let text = serde_json::to_string_pretty(&random_suite(seed, count, h))?;
            match out {
                Some(p) => std::fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
                None => println!("{text}"),
            }
            Ok(true)
        })(),
        None => {
            eprintln!("nothing to do; try `potlab run <config>` or `potlab --help`");
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
