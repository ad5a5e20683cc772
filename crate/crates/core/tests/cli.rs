use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fieldlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldlab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn small_kg(checks: Value) -> Value {
    json!({
        "version": 1,
        "name": "small kg",
        "lagrangian": "klein-gordon",
        "grid": { "sites": [32], "lengths": [std::f64::consts::TAU], "origin": [0.0] },
        "evolution": {
            "dt": std::f64::consts::TAU / 64.0,
            "steps": 128,
            "initial": { "fields": [{ "kind": "plane-wave", "amplitude": 1.0, "k": [1.0], "mass": 1.0 }] }
        },
        "checks": checks
    })
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn parse_reports_degree_and_scaling_weight() {
    let o = fieldlab(&["parse", "phi4-massless-4d"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("spacetime-independent"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("potential degree") && l.trim_end().ends_with(" 4")), "{text}");
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.lag");
    std::fs::write(&p, "field phi\nL = 1/2*d(phi,0)^2 - (").unwrap();
    assert_eq!(code(&fieldlab(&["parse", p.to_str().unwrap()])), 2);

    let mut s = small_kg(json!(["T"]));
    s["surprise"] = json!(1);
    let p = write(dir.path(), "extra.json", &s);
    assert_eq!(code(&fieldlab(&["run", "--scenario", &p, "--out", dir.path().to_str().unwrap()])), 2);
}

#[test]
fn run_writes_report_and_series_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.json", &small_kg(json!(["T", "K", "nonlocal"])));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = fieldlab(&["run", "--scenario", &sc, "--out", out.to_str().unwrap(), "--threads", "2"]);
        assert!(matches!(code(&o), 0 | 1), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ra = std::fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("report.json")).unwrap());

    let report: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["version"], 1);
    let names: Vec<&str> = report["currents"].as_array().unwrap().iter().map(|c| c["current"].as_str().unwrap()).collect();
    assert!(names.contains(&"T[0]") && names.contains(&"K[1]"), "{names:?}");
    let k = report["checks"].as_array().unwrap().iter().find(|c| c["check"] == "K").unwrap();
    assert!((k["metrics"]["rho"].as_f64().unwrap() + 1.0).abs() < 1e-12);

    let csv = std::fs::read_to_string(a.join("T_0_.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,current,Q,divergence_l2,divergence_linf"));
    // Slices 1..=127 of 129: the first and last have no central ∂₀.
    assert_eq!(lines.count(), 127);
    assert!(a.join("nonlocal.csv").exists());
}

#[test]
fn refused_checks_exit_with_two_and_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = small_kg(json!(["T"]));
    s["lagrangian"] = json!("dissipative-kg");
    let sc = write(dir.path(), "s.json", &s);
    let out = dir.path().join("out");
    let o = fieldlab(&["run", "--scenario", &sc, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let refusals = report["refusals"].as_array().unwrap();
    assert_eq!(refusals.len(), 1);
    assert_eq!(refusals[0]["check"], "T");
}

#[test]
fn blowup_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = small_kg(json!(["T"]));
    s["evolution"]["dt"] = json!(0.5);
    s["evolution"]["courant_check"] = json!(false);
    s["evolution"]["steps"] = json!(400);
    let sc = write(dir.path(), "s.json", &s);
    let o = fieldlab(&["run", "--scenario", &sc, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn converge_fits_second_order_and_needs_three_grids() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.json", &small_kg(json!(["T"])));
    let out = dir.path().join("c");
    let o = fieldlab(&["converge", "--scenario", &sc, "--out", out.to_str().unwrap(), "--resolutions", "16,32"]);
    assert_eq!(code(&o), 2);

    let o = fieldlab(&["converge", "--scenario", &sc, "--out", out.to_str().unwrap(), "--resolutions", "16,32,64"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table: Value = serde_json::from_slice(&std::fs::read(out.join("convergence.json")).unwrap()).unwrap();
    let rows = table["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        let p = r["order"].as_f64().unwrap();
        assert!((1.8..=2.2).contains(&p), "{r}");
    }
    assert!(out.join("convergence.csv").exists());
}
