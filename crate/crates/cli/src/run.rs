//! Suite execution and report files.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use potlab::checker::{
    default_dtilde, proof_chain_check, verify_individual_1, verify_individual_2, verify_main, verify_uniform_sweep,
    ChainOptions, CheckOptions, InequalityReport,
};
use potlab::fields::{FieldJson, ScalarField};
use potlab::green::{extend_green, green_function, harmonic_measure, HarmonicMeasureOptions, ModelDomain, RelaxOptions};
use potlab::jensen::{duality_inverse, sector_distance, JensenPotential, NORMALIZATION_TOLERANCE};
use potlab::testfn::{check_extension, extend_test, MinorantOptions, DECAY_CELLS};
use potlab::zeros::poincare_lelong_residual;
use potlab::NodeIndex;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{Check, Scenario, Suite};

/// Truncation levels of the proof-chain check when a scenario names none.
pub const DEFAULT_N_LIST: [u32; 3] = [4, 16, 64];
/// Angular sectors used to compare dual and harmonic measures.
pub const DUALITY_SECTORS: usize = 16;
/// Witness nodes listed in a report; the total count is always given.
pub const MAX_LISTED_WITNESSES: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Overrides every scenario's tolerance.
    pub tolerance: Option<f64>,
    pub emit_fields: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    pub check: String,
    pub status: Status,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub margin: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "Cbar")]
    pub cbar: Option<f64>,
    pub h: f64,
    pub error: String,
}

/// Everything a scenario produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub row: Row,
    pub report: Value,
    pub fields: Vec<(String, FieldJson)>,
    pub runtime: Duration,
}

struct Evaluated {
    lhs: f64,
    rhs: f64,
    c: Option<f64>,
    cbar: Option<f64>,
    verdict: bool,
    result: Value,
    fields: Vec<(&'static str, ScalarField)>,
}

impl Evaluated {
    fn from_inequality(r: &InequalityReport, result: Value) -> Self {
        Self {
            lhs: r.lhs,
            rhs: r.rhs,
            c: Some(r.constants.c),
            cbar: Some(r.constants.cbar),
            verdict: r.verdict,
            result,
            fields: Vec::new(),
        }
    }
}

/// Settings in force for a scenario, written into its report.
#[derive(Debug, Clone, Serialize)]
struct Settings {
    h: f64,
    tolerance: f64,
    tolerance_source: &'static str,
    dtilde: Option<ModelDomain>,
    n_list: Option<Vec<u32>>,
    chain: Option<ChainOptions>,
    relax: RelaxOptions,
    minorant: MinorantOptions,
    decay_cells: f64,
    duality_normalization_tolerance: f64,
    duality_sectors: usize,
}

fn tolerance_of(s: &Scenario, opts: &RunOptions) -> (f64, &'static str) {
    match (opts.tolerance, s.tolerance) {
        (Some(t), _) => (t, "command line"),
        (None, Some(t)) => (t, "scenario"),
        (None, None) => (s.check.default_tolerance(), "default"),
    }
}

fn effective_dtilde(s: &Scenario) -> anyhow::Result<ModelDomain> {
    match s.dtilde {
        Some(d) => Ok(d),
        None => Ok(default_dtilde(&s.domain.shape, &s.exclusion()?, s.domain.h)?),
    }
}

fn chain_options(tol: f64) -> ChainOptions {
    ChainOptions {
        residual_tolerance: tol,
        ..ChainOptions::default()
    }
}

fn worst(reports: &[InequalityReport]) -> &InequalityReport {
    reports
        .iter()
        .reduce(|a, b| if b.margin < a.margin { b } else { a })
        .expect("at least one report")
}

fn evaluate(s: &Scenario, tol: f64) -> anyhow::Result<Evaluated> {
    s.check_points()?;
    let grid = s.grid()?;
    let set = s.exclusion()?;
    let opts = CheckOptions {
        tolerance: tol,
        dtilde: s.dtilde,
    };
    match s.check {
        Check::Main => {
            let u = s.u_field(&grid)?;
            let m = s.majorant.build(&grid)?;
            let specs: Vec<_> = s.test.iter().chain(&s.sweep).collect();
            if specs.is_empty() {
                bail!("this check needs a `test` function");
            }
            let mut reports = Vec::with_capacity(specs.len());
            let mut first_v = None;
            for spec in specs {
                let v = spec.build(&grid, &set, s.b)?;
                reports.push(verify_main(&u, &m, &v, &set, s.x0, s.b, &opts)?);
                first_v.get_or_insert(v);
            }
            let w = worst(&reports);
            let mut e = Evaluated::from_inequality(w, json!({ "reports": reports }));
            e.verdict = reports.iter().all(|r| r.verdict);
            e.fields = vec![("u", u), ("M", m.field()), ("v", first_v.expect("one test").field().clone())];
            Ok(e)
        }
        Check::Uniform => {
            let f = s.function()?;
            let m = s.majorant.build(&grid)?;
            let family = s
                .test
                .iter()
                .chain(&s.sweep)
                .map(|spec| spec.build(&grid, &set, s.b))
                .collect::<anyhow::Result<Vec<_>>>()?;
            if family.is_empty() {
                bail!("this check needs a `test` function or a `sweep`");
            }
            let reports = verify_uniform_sweep(&f, &m, &family, &set, s.x0, s.b, &opts)?;
            let mut e = Evaluated::from_inequality(worst(&reports), json!({ "reports": reports }));
            e.verdict = reports.iter().all(|r| r.verdict);
            e.fields = vec![
                ("log_modulus", f.log_modulus_field(grid.clone())),
                ("M", m.field()),
                ("v", family[0].field().clone()),
            ];
            Ok(e)
        }
        Check::Individual1 => {
            let f = s.function()?;
            let m = s.majorant.build(&grid)?;
            let w = s.w_field(&grid)?;
            let v = s.test_spec()?.build(&grid, &set, s.b)?;
            if s.exhaustion.is_empty() {
                bail!("this check needs an `exhaustion`");
            }
            let r = verify_individual_1(&f, s.subdivisor.as_ref(), &m, &w, &v, &s.exhaustion, s.x0, &opts)?;
            Ok(Evaluated {
                lhs: r.full_sum,
                rhs: r.budget,
                c: Some(r.uniform.constants.c),
                cbar: Some(r.uniform.constants.cbar),
                verdict: r.verdict,
                result: serde_json::to_value(&r)?,
                fields: vec![("w", w), ("v", v.field().clone())],
            })
        }
        Check::Individual2 => {
            let f = s.function()?;
            let m = s.majorant.build(&grid)?;
            let w = s.w_field(&grid)?;
            let key = s.key.context("this check needs a `key` condition (decay or regular)")?;
            let r = verify_individual_2(&f, &m, &w, &set, s.x0, key, &opts)?;
            let mut e = Evaluated::from_inequality(&r.uniform, serde_json::to_value(&r)?);
            e.verdict = r.verdict;
            e.fields = vec![("w", w)];
            Ok(e)
        }
        Check::ProofChain => {
            let u = s.u_field(&grid)?;
            let m = s.majorant.build(&grid)?;
            let v = s.test_spec()?.build(&grid, &set, s.b)?;
            let dt = effective_dtilde(s)?;
            let ext = extend_test(&v, s.x0, &dt, s.b)?;
            let n_list = s.n_list.clone().unwrap_or(DEFAULT_N_LIST.to_vec());
            let checks = check_extension(&ext.vtilde, s.x0, &set)?;
            let r = proof_chain_check(&u, &m, &ext.vtilde, s.x0, &n_list, &chain_options(tol))?;
            Ok(Evaluated {
                lhs: r.max_residual,
                rhs: tol,
                c: Some(1.0 / ext.c_tilde),
                cbar: None,
                verdict: r.verdict && checks.passed(),
                result: json!({ "dtilde": dt, "c_tilde": ext.c_tilde, "extension": checks, "chain": r }),
                fields: vec![("u", u), ("M", m.field()), ("vtilde", ext.vtilde)],
            })
        }
        Check::PoincareLelong => {
            let f = s.function()?;
            let r = poincare_lelong_residual(&f, grid.clone())?;
            let relative = r
                .matches
                .iter()
                .map(|m| (m.recovered - f64::from(m.multiplicity)).abs() / f64::from(m.multiplicity))
                .fold(0.0, f64::max);
            let degree = r.matches.iter().map(|m| m.multiplicity).sum::<u32>().max(1);
            Ok(Evaluated {
                lhs: relative,
                rhs: tol,
                c: None,
                cbar: None,
                verdict: relative <= tol && r.spurious_mass <= tol * f64::from(degree),
                result: serde_json::to_value(&r)?,
                fields: vec![("log_modulus", f.log_modulus_field(grid.clone()))],
            })
        }
        Check::Duality => {
            let dt = effective_dtilde(s)?;
            let g = extend_green(&green_function(&dt, s.x0, grid.clone())?, &dt);
            let jp = JensenPotential::new(g.clone(), s.x0)?;
            let ratio = jp.ratio();
            let mu = duality_inverse(&jp, NORMALIZATION_TOLERANCE)?;
            let hm = harmonic_measure(&dt, s.x0, &HarmonicMeasureOptions::default())?.to_charge();
            let d = sector_distance(mu.measure(), &hm, s.x0, DUALITY_SECTORS);
            Ok(Evaluated {
                lhs: d,
                rhs: tol,
                c: None,
                cbar: None,
                verdict: d <= tol,
                result: json!({ "sector_distance": d, "ratio": ratio, "dual_mass": mu.measure().total() }),
                fields: vec![("green", g)],
            })
        }
    }
}

fn witnesses(e: &anyhow::Error) -> Option<&[NodeIndex]> {
    match e.downcast_ref::<potlab::Error>()? {
        potlab::Error::Precondition { witnesses, .. } => Some(witnesses),
        potlab::Error::NotSubharmonic { violations } => Some(violations),
        _ => None,
    }
}

fn error_json(e: &anyhow::Error) -> Value {
    let w = witnesses(e).unwrap_or(&[]);
    json!({
        "message": format!("{e:#}"),
        "witness_count": w.len(),
        "witnesses": &w[..w.len().min(MAX_LISTED_WITNESSES)],
    })
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs one scenario; failures of any kind end up in the outcome.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Outcome {
    let start = Instant::now();
    let (tol, source) = tolerance_of(s, opts);
    let evaluated = catch_unwind(AssertUnwindSafe(|| evaluate(s, tol)))
        .unwrap_or_else(|p| Err(anyhow::anyhow!("internal error: {}", panic_message(p.as_ref()))));
    let settings = Settings {
        h: s.domain.h,
        tolerance: tol,
        tolerance_source: source,
        dtilde: effective_dtilde(s).ok(),
        n_list: (s.check == Check::ProofChain).then(|| s.n_list.clone().unwrap_or(DEFAULT_N_LIST.to_vec())),
        chain: (s.check == Check::ProofChain).then(|| chain_options(tol)),
        relax: RelaxOptions::default(),
        minorant: MinorantOptions::default(),
        decay_cells: DECAY_CELLS,
        duality_normalization_tolerance: NORMALIZATION_TOLERANCE,
        duality_sectors: DUALITY_SECTORS,
    };
    let mut row = Row {
        name: s.name.clone(),
        check: s.check.name().into(),
        status: Status::Error,
        lhs: None,
        rhs: None,
        margin: None,
        c: None,
        cbar: None,
        h: s.domain.h,
        error: String::new(),
    };
    let (result, error, fields) = match evaluated {
        Ok(e) => {
            row.status = if e.verdict { Status::Pass } else { Status::Fail };
            row.lhs = Some(e.lhs);
            row.rhs = Some(e.rhs);
            row.margin = Some(e.rhs - e.lhs);
            row.c = e.c;
            row.cbar = e.cbar;
            let fields = if opts.emit_fields {
                e.fields.iter().map(|(k, f)| (k.to_string(), f.to_json())).collect()
            } else {
                Vec::new()
            };
            (e.result, Value::Null, fields)
        }
        Err(e) => {
            log::warn!("scenario {}: {e:#}", s.name);
            row.error = format!("{e:#}");
            (Value::Null, error_json(&e), Vec::new())
        }
    };
    let report = json!({
        "name": s.name,
        "check": s.check,
        "status": row.status,
        "settings": settings,
        "scenario": s,
        "result": result,
        "error": error,
    });
    Outcome {
        row,
        report,
        fields,
        runtime: start.elapsed(),
    }
}

/// Runs every scenario in parallel; outcomes keep the suite order.
pub fn run_suite(suite: &Suite, opts: &RunOptions) -> Vec<Outcome> {
    suite.scenarios.par_iter().map(|s| run_scenario(s, opts)).collect()
}

/// File-system friendly form of a scenario name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Column order of the results table.
pub const CSV_HEADER: [&str; 10] = ["name", "check", "status", "lhs", "rhs", "margin", "C", "Cbar", "h", "error"];

pub fn write_csv(path: &Path, outcomes: &[Outcome]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    if outcomes.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for o in outcomes {
        w.serialize(&o.row)?;
    }
    w.flush()?;
    Ok(())
}

/// Run-dependent data kept out of the results table.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool_version: &'static str,
    pub schema_version: u32,
    pub config: String,
    pub started_unix_seconds: u64,
    pub jobs: usize,
    pub total_runtime_seconds: f64,
    pub runtimes: Vec<Runtime>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Runtime {
    pub name: String,
    pub seconds: f64,
}

/// Writes `results.csv`, `metadata.json`, one report per scenario under
/// `reports/`, and the emitted fields under `fields/<name>/`.
pub fn write_outputs(dir: &Path, outcomes: &[Outcome], meta: &Metadata) -> anyhow::Result<()> {
    fs::create_dir_all(dir.join("reports")).with_context(|| format!("creating {}", dir.display()))?;
    write_csv(&dir.join("results.csv"), outcomes)?;
    for o in outcomes {
        let stem = file_stem(&o.row.name);
        fs::write(dir.join("reports").join(format!("{stem}.json")), serde_json::to_string_pretty(&o.report)?)?;
        if !o.fields.is_empty() {
            let fdir = dir.join("fields").join(&stem);
            fs::create_dir_all(&fdir)?;
            for (k, f) in &o.fields {
                fs::write(fdir.join(format!("{k}.json")), serde_json::to_string(f)?)?;
            }
        }
    }
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}
