use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mmassoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmassoc")).args(args).output().unwrap()
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for name in ["default.json", "hetnet.json"] {
        let out = mmassoc(&["validate", "--scenario", &scenario(name)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));
    }
}

#[test]
fn validate_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut s: serde_json::Value = serde_json::from_str(&fs::read_to_string(scenario("default.json")).unwrap()).unwrap();
    s["bandwidth_hz"] = serde_json::json!(-1.0);
    for bs in s["bs"].as_array_mut().unwrap() {
        bs["max_users"] = serde_json::json!(1);
    }
    fs::write(&path, s.to_string()).unwrap();
    let out = mmassoc(&["validate", "--scenario", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bandwidth"), "{err}");
    assert!(err.contains("capacity"), "{err}");
}

#[test]
fn run_writes_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = mmassoc(&[
        "run",
        "--scenario",
        &scenario("default.json"),
        "--scheme",
        "wcs",
        "--slots",
        "3",
        "--seed",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["summary.json", "rates.csv", "association.csv", "trace.csv"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["mean_spectral_efficiency"].as_f64().unwrap() > 0.0);
    assert_eq!(fs::read_to_string(dir.path().join("rates.csv")).unwrap().lines().count(), 1 + 3 * 12);
}

#[test]
fn compare_shares_channels_across_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mmassoc(&[
        "compare",
        "--scheme",
        "wcs,max-sinr-drop",
        "--slots",
        "2",
        "--utility",
        "min-rate",
        "--csi",
        "large-scale-only",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
}

#[test]
fn scale_reports_one_row_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = mmassoc(&[
        "scale",
        "--axis",
        "bs-panel",
        "--sizes",
        "4x4,8x8",
        "--repetitions",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(dir.path().join("scaling.csv")).unwrap().lines().count(), 3);
}

#[test]
fn exhaustive_over_budget_fails_with_diagnostic() {
    let out = mmassoc(&["run", "--scheme", "exhaustive", "--slots", "1", "--budget", "100"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn bad_arguments_are_rejected() {
    for args in [
        &["run", "--scheme", "greedy"][..],
        &["run", "--interference", "sometimes"],
        &["run", "--scenario", "/nonexistent/scenario.json"],
        &["scale", "--axis", "ue-panel", "--sizes", "4by4"],
    ] {
        let out = mmassoc(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}
