use std::process::{Command, Output};

use serde_json::Value;

fn corrstoch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrstoch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn check_passes_with_per_suite_counts() {
    let out = corrstoch(&["check", "--trials", "500", "--seed", "42"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["all_passed"], true);
    for suite in v["suites"].as_array().unwrap() {
        assert_eq!(suite["passed"], 500, "{suite}");
    }
}

#[test]
fn demo_shows_the_cnot_outputs() {
    let out = corrstoch(&["demo"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["cnot"]["a"]["q"], serde_json::json!([1.0, 0.0]));
    assert_eq!(v["cnot"]["b"]["q"], serde_json::json!([0.0, 1.0]));
}

#[test]
fn negative_trials_is_a_config_error() {
    let out = corrstoch(&["check", "--trials", "-3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}

#[test]
fn config_file_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"mode":"check","trials":-1}"#).unwrap();
    let out = corrstoch(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`trials`"));

    std::fs::write(&path, r#"{"mode":"check","trials":3,"seed":8}"#).unwrap();
    let out = corrstoch(&["--config", path.to_str().unwrap(), "--trials", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["trials"], 4);
}

#[test]
fn reports_are_byte_identical_for_a_fixed_seed() {
    for args in [
        &["check", "--trials", "50", "--seed", "7"][..],
        &["secondlaw", "--seed", "7", "--dim-system", "3"][..],
        &["tomography", "--seed", "7", "--samples", "5000"][..],
        &["random-instance", "--seed", "7"][..],
    ] {
        let a = corrstoch(args);
        let b = corrstoch(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn random_instance_feeds_secondlaw() {
    let out = corrstoch(&["random-instance", "--seed", "11", "--dim-env", "3"]);
    let v = json(&out);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let cfg = serde_json::json!({"mode": "secondlaw", "instance": v["instance"], "units": "bits"});
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = corrstoch(&["--config", path.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&out);
    assert_eq!(report["units"], "bits");
    assert_eq!(report["report"]["satisfied"], true);
}

#[test]
fn csv_output() {
    let out = corrstoch(&["tomography", "--samples", "1000", "--output", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("j,k,output,count,accepted,samples\n"));
    assert_eq!(text.lines().count(), 1 + 8);

    let out = corrstoch(&["demo", "--output", "csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("output"));
}
