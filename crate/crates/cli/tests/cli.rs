//! End-to-end runs of the `potlab` binary on small suites.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn potlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_potlab"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn write_suite(dir: &Path, suite: &Value) -> String {
    let path = dir.join("suite.json");
    fs::write(&path, serde_json::to_string_pretty(suite).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn budget_scenario(name: &str) -> Value {
    json!({
        "name": name,
        "check": "uniform",
        "domain": { "shape": { "kind": "disk", "center": [0, 0], "radius": 1 }, "h": 1.0 / 32.0 },
        "s": [{ "center": [0, 0], "radius": 0.5 }],
        "dtilde": { "kind": "disk", "center": [0, 0], "radius": 1 },
        "function": { "kind": "blaschke", "zeros": [
            { "point": [0.7, 0], "multiplicity": 1 },
            { "point": [-0.2, 0.6], "multiplicity": 2 }
        ] },
        "test": { "kind": "green", "pole": [0, 0] }
    })
}

#[test]
fn empty_suite_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write_suite(dir.path(), &json!({ "schema_version": 1, "scenarios": [] }));
    let out = dir.path().join("out");
    let o = potlab(&["run", &suite, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.trim_end(), "name,check,status,lhs,rhs,margin,C,Cbar,h,error");
    let meta: Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], 1);
}

#[test]
fn schema_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_suite(dir.path(), &json!({ "schema_version": 1, "scenarios": [], "extra": true }));
    assert_eq!(potlab(&["run", &unknown]).status.code(), Some(2));
    let version = write_suite(dir.path(), &json!({ "schema_version": 99, "scenarios": [] }));
    assert_eq!(potlab(&["run", &version]).status.code(), Some(2));
    let twice = write_suite(
        dir.path(),
        &json!({ "schema_version": 1, "scenarios": [budget_scenario("a"), budget_scenario("a")] }),
    );
    assert_eq!(potlab(&["run", &twice]).status.code(), Some(2));
    assert_eq!(potlab(&["run", "/nonexistent/suite.json"]).status.code(), Some(2));
}

#[test]
fn passing_suite_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write_suite(dir.path(), &json!({ "schema_version": 1, "scenarios": [budget_scenario("budget")] }));
    let out = dir.path().join("out");
    let o = potlab(&["run", &suite, "--out", out.to_str().unwrap(), "--emit-fields"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let row = reader.records().next().unwrap().unwrap();
    assert_eq!(&row[0], "budget");
    assert_eq!(&row[2], "pass");
    let margin: f64 = row[5].parse().unwrap();
    assert!(margin > 0.0);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("reports/budget.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "pass");
    assert!(report["settings"]["h"].as_f64().unwrap() > 0.0);
    let fields = fs::read_dir(out.join("fields/budget")).unwrap().count();
    assert!(fields > 0);
}

#[test]
fn tolerance_flag_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write_suite(dir.path(), &json!({ "schema_version": 1, "scenarios": [budget_scenario("budget")] }));
    let out = dir.path().join("out");
    let o = potlab(&["run", &suite, "--out", out.to_str().unwrap(), "--tolerance", "0.25"]);
    assert!(o.status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("reports/budget.json")).unwrap()).unwrap();
    assert_eq!(report["settings"]["tolerance"], 0.25);
}

#[test]
fn list_checks_names_every_check() {
    let o = potlab(&["--list-checks"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["main", "uniform", "individual1", "individual2", "proof-chain", "poincare-lelong", "duality"] {
        assert!(text.contains(name), "{name} missing from {text}");
    }
}

#[test]
fn generated_suite_runs() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("random.json");
    let g = potlab(&["generate", "--seed", "7", "--count", "3", "--h", "0.03125", "--out", suite.to_str().unwrap()]);
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stderr));
    let out = dir.path().join("out");
    let o = potlab(&["run", suite.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv::Reader::from_path(out.join("results.csv")).unwrap().records().count();
    assert_eq!(rows, 3);
}
