use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn t20(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_t20")).args(args).env_remove("T20_PROFILE_STORE").output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn optimize_batting_is_deterministic() {
    let kkr = fixture("kkr_mi_over12.json");
    let args = ["optimize", "batting", "--scenario", &kkr, "--seed", "4", "--n1", "300", "--n2", "1000", "--top-k", "3"];
    let (a, b) = (t20(&args), t20(&args));
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert_eq!(r["ranked"].as_array().unwrap().len(), 24);
    assert_eq!(r["provenance"]["seed"], 4);
}

#[test]
fn evaluate_writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eval.json");
    let gt = fixture("gt_pbks_over10.json");
    let o = t20(&["evaluate", "--scenario", &gt, "--sims", "5000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let r: Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert_eq!(r["kind"], "bowling");
    assert_eq!(r["n_sims"], 5000);
}

#[test]
fn audit_batting_reports_positive_gap() {
    let kkr = fixture("kkr_mi_over12.json");
    let r = json(&t20(&["audit", "--scenario", &kkr, "--seed", "7", "--n1", "2000", "--n2", "10000", "--top-k", "5"]));
    assert!(r["gap"].as_f64().unwrap() > 0.0, "{r}");
    assert_eq!(r["ranked"][0]["rank"], 1);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = t20(&["evaluate", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_scenario_fails_cleanly() {
    let o = t20(&["evaluate", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn profiles_build_writes_a_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let corpus = fixture("mini_corpus.csv");
    let meta = json(&t20(&["profiles", "build", "--corpus", &corpus, "--exclude", "m2", "--out", store.to_str().unwrap()]));
    assert_eq!(meta["exclude"], serde_json::json!(["m2"]));
    for f in ["batsmen.csv", "bowlers.csv", "store.json"] {
        assert!(store.join(f).exists(), "{f}");
    }
}
