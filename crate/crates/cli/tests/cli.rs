use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn grasp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grasp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic problem: 6 groups of 2 columns, 2 informative.
fn synth(dir: &Path) {
    let out = grasp(&[
        "synth", "--n", "300", "--p", "12", "--groups", "6x2", "--informative", "2", "--rho", "0.4",
        "--coef", "1.5", "--seed", "3", "--out", path(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn select(dir: &Path, selector: &str, out: &Path, extra: &[&str]) -> Output {
    let data = dir.join("data.csv");
    let groups = dir.join("groups.csv");
    let mut args = vec![
        "select", "--data", path(&data), "--label", "y", "--groups", path(&groups), "--selector",
        selector, "--bootstrap", "50", "--n-trees", "10", "--seed", "9", "--out", path(out),
    ];
    args.extend_from_slice(extra);
    grasp(&args)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn synth_writes_data_groups_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let truth = read_json(&dir.path().join("truth.json"));
    assert_eq!(truth["informative_groups"].as_array().unwrap().len(), 2);
    let header = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert!(header.starts_with("g0_f0,g0_f1,g1_f0"));
}

#[test]
fn select_writes_report_and_feature_list() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let report = dir.path().join("report.json");
    let features = dir.path().join("features.csv");
    let out = select(dir.path(), "grasp", &report, &["--features-csv", path(&features)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let r = read_json(&report);
    assert_eq!(r["report_version"], 1);
    assert_eq!(r["selector"], "grasp");
    assert_eq!(r["folds"].as_array().unwrap().len(), 5);
    for key in ["accuracy", "f1", "mcc", "mean_vif", "mean_abs_corr", "jaccard", "n_features", "bootstrap_ci"] {
        assert!(r["evaluation"].get(key).is_some(), "missing {key}");
    }
    let listed: Vec<String> = std::fs::read_to_string(&features)
        .unwrap()
        .lines()
        .skip(1)
        .map(String::from)
        .collect();
    let reported: Vec<String> = r["final_features"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(listed, reported);
}

#[test]
fn repeated_select_differs_only_in_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert!(select(dir.path(), "shap_median", &a, &[]).status.success());
    assert!(select(dir.path(), "shap_median", &b, &[]).status.success());
    let (mut ra, mut rb) = (read_json(&a), read_json(&b));
    ra["generated_at"] = Value::Null;
    rb["generated_at"] = Value::Null;
    assert_eq!(ra, rb);
}

#[test]
fn benchmark_prints_a_row_per_selector() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let data = dir.path().join("data.csv");
    let report = dir.path().join("bench.json");
    let out = grasp(&[
        "benchmark", "--data", path(&data), "--label", "y", "--selectors", "grasp,shap_median",
        "--bootstrap", "20", "--n-trees", "10", "--out", path(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("grasp") && table.contains("shap_median"));
    assert_eq!(read_json(&report)["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn single_selector_benchmark_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let data = dir.path().join("data.csv");
    let out = grasp(&[
        "benchmark", "--data", path(&data), "--label", "y", "--selectors", "grasp",
        "--out", path(&dir.path().join("x.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("need ≥2 selectors"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let report = dir.path().join("r.json");

    assert_eq!(grasp(&["--help"]).status.code(), Some(0));
    assert_eq!(grasp(&["select", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(select(dir.path(), "forest", &report, &[]).status.code(), Some(1));
    assert_eq!(select(dir.path(), "grasp", &report, &["--folds", "1"]).status.code(), Some(1));

    let data = dir.path().join("data.csv");
    let out = grasp(&["select", "--data", path(&data), "--label", "outcome", "--out", path(&report)]);
    assert_eq!(out.status.code(), Some(2));

    let partial = dir.path().join("partial.csv");
    std::fs::write(&partial, "feature,group\ng0_f0,a\n").unwrap();
    let out = grasp(&[
        "select", "--data", path(&data), "--label", "y", "--groups", path(&partial), "--n-trees", "5",
        "--out", path(&report),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("uncovered column"));

    let missing = dir.path().join("nope.csv");
    let out = grasp(&["select", "--data", path(&missing), "--label", "y", "--out", path(&report)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_rejects_inconsistent_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = grasp(&["synth", "--n", "10", "--p", "7", "--groups", "2x3", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let out = grasp(&[
        "synth", "--n", "10", "--groups", "2x3", "--rho", "1.0", "--out", path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
