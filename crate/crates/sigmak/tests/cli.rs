use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sigmak::io::{read_csv, read_dump};

fn sigmak(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigmak")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_wall_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

const MANUFACTURED: &str = "[grid]\nn = 8\n[operator]\nk = 2\nb = 1\n[chi]\nmode = identity\n[psi]\nmode = manufactured\namplitude = 0.1\n";

#[test]
fn identities_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigmak(dir.path(), &["identities", "--n", "6", "--k", "3", "--samples", "1000", "--seed", "42"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_csv(&dir.path().join("identities.csv")).unwrap();
    assert_eq!(t.len(), 1000);
    let j = json(&dir.path().join("identities.json"));
    assert_eq!(j["seed"], 42);
    assert_eq!(j["config"]["ks"], serde_json::json!([3]));
    assert_eq!(j["violations"], 0);
}

#[test]
fn runs_are_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["concavity-sweep", "--n", "4", "--k", "2", "--samples", "300", "--seed", "7", "--csv", "a.csv", "--json", "a.json"];
    assert_eq!(code(&sigmak(dir.path(), &args)), 0);
    let first = std::fs::read(dir.path().join("a.csv")).unwrap();
    let first_json = without_wall_time(json(&dir.path().join("a.json")));
    // replay from the recorded command line
    let recorded: Vec<String> =
        first_json["command_line"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let recorded: Vec<&str> = recorded.iter().map(String::as_str).collect();
    assert_eq!(code(&sigmak(dir.path(), &recorded)), 0);
    assert_eq!(std::fs::read(dir.path().join("a.csv")).unwrap(), first);
    assert_eq!(without_wall_time(json(&dir.path().join("a.json"))), first_json);
    assert_eq!(first_json["config"]["seed"], 7);
    assert_eq!(first_json["config"]["lambda_min"], 1e3);
}

#[test]
fn violations_exit_1_and_match_flagged_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigmak(
        dir.path(),
        &["concavity-sweep", "--n", "6", "--k", "2", "--delta", "0.5", "--lambda1", "0.1:1", "--samples", "2000"],
    );
    assert_eq!(code(&o), 1);
    let j = json(&dir.path().join("concavity-sweep.json"));
    let t = read_csv(&dir.path().join("concavity-sweep.csv")).unwrap();
    let c = t.column("negative").unwrap();
    let flagged = t.rows.iter().filter(|r| r[c] == "1").count();
    assert!(flagged > 0);
    assert_eq!(j["violations"].as_u64().unwrap() as usize, flagged);
    assert_eq!(j["summary"]["negative_witnesses"].as_array().unwrap().len(), flagged.min(10));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("bad.cfg"), "[grid]\nsize = 8\n").unwrap();
    std::fs::write(p.join("syntax.cfg"), "[grid\nn = 8\n").unwrap();
    let cases: &[&[&str]] = &[
        &["identities", "--bogus"],
        &["frobnicate"],
        &["cone-check", "--n", "3", "--k", "4"],
        &["concavity-sweep", "--b", "1,x"],
        &["concavity-sweep", "--lambda1", "10"],
        &["concavity-sweep", "--gamma", "2"],
        &["lift-check", "--m", "2", "--b", "1"],
        &["concavity-min", "--lambda", "1,2,3"],
        &["identities", "--csv", "missing/dir/out.csv"],
        &["identities", "--json", "."],
        &["solve", "--config", "bad.cfg"],
        &["solve", "--config", "syntax.cfg"],
        &["solve", "--config", "absent.cfg"],
    ];
    for args in cases {
        let o = sigmak(p, args);
        assert_eq!(code(&o), 2, "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    }
}

#[test]
fn help_documents_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigmak(dir.path(), &["concavity-sweep", "--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in ["--n", "--k", "--b", "--gamma", "--delta", "--lambda1", "--samples", "--seed", "--csv", "--json"] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn empty_threshold_grid_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sigmak(dir.path(), &["threshold-scan", "--deltas", ""])), 0);
    let bytes = std::fs::read(dir.path().join("threshold-scan.csv")).unwrap();
    assert_eq!(bytes, b"delta,lambda_min,lambda_max,accepted,negatives,worst_margin,worst_normalized\n");
}

#[test]
fn concavity_min_row_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = sigmak(dir.path(), &["concavity-min", "--k", "2", "--lambda", "1e3,0.3,-0.2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_csv(&dir.path().join("concavity-min.csv")).unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.header.len(), 3 + 7 + 3 + 1);
    let j = json(&dir.path().join("concavity-min.json"));
    let from_csv: f64 = t.rows[0][t.column("min_margin").unwrap()].parse().unwrap();
    assert_eq!(from_csv.to_bits(), j["summary"]["min_margin"].as_f64().unwrap().to_bits());
    let lambda: Vec<f64> = (0..3).map(|i| t.rows[0][i].parse().unwrap()).collect();
    assert_eq!(lambda, vec![1e3, 0.3, -0.2]);
}

#[test]
fn solve_writes_trace_dump_and_feeds_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("m.cfg"), MANUFACTURED).unwrap();
    let o = sigmak(p, &["solve", "--config", "m.cfg", "--dump", "u.hcl1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = read_csv(&p.join("solve.csv")).unwrap();
    assert!(trace.len() >= 2);
    let j = json(&p.join("solve.json"));
    assert_eq!(j["summary"]["converged"], true);
    assert!(j["summary"]["residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(j["config"]["n"], 8);
    let (n, fields) = read_dump(&p.join("u.hcl1")).unwrap();
    assert_eq!((n, fields.len(), fields[0].len()), (8, 1, 4096));
    let o = sigmak(p, &["diagnose", "--config", "m.cfg", "--state", "u.hcl1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = json(&p.join("diagnose.json"));
    assert_eq!(d["summary"]["cone_ok"], true);
    assert!(d["summary"]["lambda_max"].as_f64().unwrap() > 1.0);
    // solving again reproduces the trace byte for byte
    let again = std::fs::read(p.join("solve.csv")).unwrap();
    assert_eq!(code(&sigmak(p, &["solve", "--config", "m.cfg"])), 0);
    assert_eq!(std::fs::read(p.join("solve.csv")).unwrap(), again);
}
