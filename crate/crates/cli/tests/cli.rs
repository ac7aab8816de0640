use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn bellkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellkit")).args(args).output().unwrap()
}

fn payload(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let env: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(env["version"].is_string());
    assert!(env["wall_clock_seconds"].is_number());
    env["payload"].clone()
}

const PR_BOX: &str = r#"{"contexts": [
  {"a": 1, "b": 1, "p": [["1/2", "0"], ["0", "1/2"]]},
  {"a": 1, "b": 2, "p": [["1/2", "0"], ["0", "1/2"]]},
  {"a": 2, "b": 1, "p": [["1/2", "0"], ["0", "1/2"]]},
  {"a": 2, "b": 2, "p": [["0", "1/2"], ["1/2", "0"]]}
]}"#;

const FLOAT_UNIFORM: &str = r#"{"contexts": [
  {"a": 1, "b": 1, "p": [[0.25, 0.25], [0.25, 0.25]]},
  {"a": 1, "b": 2, "p": [[0.25, 0.25], [0.25, 0.25]]},
  {"a": 2, "b": 1, "p": [[0.25, 0.25], [0.25, 0.25]]},
  {"a": 2, "b": 2, "p": [[0.25, 0.25], [0.25, 0.25]]}
]}"#;

#[test]
fn chsh_and_fine_on_pr_box() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pr.json");
    fs::write(&path, PR_BOX).unwrap();
    let p = payload(&bellkit(&["chsh", path.to_str().unwrap()]));
    assert_eq!(p["chsh"]["max_abs"], "4/1");
    assert_eq!(p["exact"], true);
    let f = payload(&bellkit(&["fine", path.to_str().unwrap()]));
    assert_eq!(f["feasible"], false);
    assert_eq!(f["reason"], "chsh violation");
    assert_eq!(f["violated_variant"]["value"], "4/1");
}

#[test]
fn fine_on_float_behavior_gives_witness() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.json");
    fs::write(&path, FLOAT_UNIFORM).unwrap();
    let f = payload(&bellkit(&["fine", path.to_str().unwrap()]));
    assert_eq!(f["feasible"], true);
    assert_eq!(f["exact"], false);
    assert_eq!(f["witness"]["p"].as_object().unwrap().len(), 16);
}

#[test]
fn singlet_reaches_tsirelson() {
    let p = payload(&bellkit(&["singlet", "--angles", "0,90,45,135"]));
    let s = p["max_abs"].as_f64().unwrap();
    assert!((s - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
    let p = payload(&bellkit(&["singlet", "--angles", "-30,0,-30,60"]));
    assert!(p["no_signaling_delta"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn counterexample_is_exact_rationals() {
    let p = payload(&bellkit(&["counterexample"]));
    assert_eq!(p["support"]["(1,1,-1,1)"], "1/2");
    assert_eq!(p["support"]["(1,1,1,-1)"], "1/2");
    assert_eq!(p["support"].as_object().unwrap().len(), 2);
    assert_eq!(p["fine"]["feasible"], true);
}

#[test]
fn config_errors_exit_two_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "experiment = spreadsheet\nN = 0\nwindow_ns = 3\n").unwrap();
    let out = bellkit(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2: N: N must be ≥ 1"), "{err}");
    assert!(err.contains("line 3: unknown key \"window_ns\""), "{err}");

    let out = bellkit(&["singlet", "--angles", "0,90,45"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly 4 angles required"));

    assert_eq!(bellkit(&[]).status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    fs::write(&cfg, "experiment = spreadsheet\nN = 0\nruns = 3\nseed = 8\n").unwrap();
    let out = bellkit(&["--config", cfg.to_str().unwrap(), "spreadsheet", "--n", "20"]);
    let env: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(env["config"]["N"], 20);
    assert_eq!(env["config"]["runs"], 3);
    assert_eq!(env["config"]["seed"], 8);
    assert_eq!(env["payload"]["stats"]["runs"], 3);
}

#[test]
fn missing_behavior_file_is_a_runtime_failure() {
    let out = bellkit(&["chsh", "/nonexistent/behavior.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_prefix_writes_envelope_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("sub/run");
    let prefix = prefix.to_str().unwrap();
    let out = bellkit(&[
        "--seed",
        "3",
        "--out",
        prefix,
        "contextual",
        "--n",
        "500",
        "--malus",
        "-0.5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let env: Value = serde_json::from_str(&fs::read_to_string(format!("{prefix}.json")).unwrap()).unwrap();
    assert_eq!(env["config"]["seed"], 3);
    assert_eq!(env["payload"]["model"]["instrument_correlation"], -0.5);
    let contexts = env["payload"]["conditioned_behavior"]["contexts"].as_array().unwrap();
    assert!(contexts.iter().all(|c| c["retained"].as_f64().unwrap() > 0.0));
    let trials = fs::read_to_string(format!("{prefix}.trials.csv")).unwrap();
    assert!(trials.starts_with("run_id,trial,ax,by,a,b\n"));
    assert_eq!(trials.lines().count(), 1 + 4 * 500);
    let behavior = fs::read_to_string(format!("{prefix}.behavior.csv")).unwrap();
    assert_eq!(behavior.lines().count(), 5);

    let sp = dir.path().join("sp");
    let sp = sp.to_str().unwrap();
    assert!(
        bellkit(&["--out", sp, "spreadsheet", "--n", "10", "--runs", "4", "--preset", "s1"])
            .status
            .success()
    );
    let runs = fs::read_to_string(format!("{sp}.runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 5);
    let stats = fs::read_to_string(format!("{sp}.stats.csv")).unwrap();
    assert!(stats.starts_with("runs,violated,frequency"));
}

#[test]
fn seed_changes_spreadsheet_payload() {
    let a = payload(&bellkit(&["--seed", "1", "spreadsheet", "--n", "50", "--runs", "20"]));
    let b = payload(&bellkit(&["--seed", "1", "spreadsheet", "--n", "50", "--runs", "20"]));
    let c = payload(&bellkit(&["--seed", "2", "spreadsheet", "--n", "50", "--runs", "20"]));
    assert_eq!(a, b);
    assert_ne!(a, c);
}
