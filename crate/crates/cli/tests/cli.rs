use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stdout);
    serde_json::from_str(text.lines().last().expect("one line of output")).expect("stdout is JSON")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn classify_split_is_unique_l1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("split.json");
    let o = run(&["classify", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout_json(&o)["result"]["verdict"], "UNIQUE_L1");
    let csv = std::fs::read_to_string(dir.path().join("classify.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("UNIQUE_L1,0,0,-0.6931471805599453,exact"));
}

#[test]
fn validate_mean_two_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("mean_two.json");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let v = stdout_json(&o);
    assert_eq!(v["result"]["pass"], false);
    assert_eq!(v["result"]["failed"][0]["check"], "quenched_mean");
    assert!(dir.path().join("validation.csv").exists());
}

#[test]
fn iterate_rerun_reproduces_checksums() {
    let cfg = config("two_state.json");
    let args = ["iterate", "--config", cfg.to_str().unwrap(), "--seed", "21"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(&args, a.path()).status.success());
    assert!(run(&args, b.path()).status.success());
    let (ma, mb) = (manifest(a.path()), manifest(b.path()));
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
    assert_eq!(ma["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn seed_changes_config_hash_and_environment() {
    let cfg = config("two_state.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&["iterate", "--config", cfg.to_str().unwrap(), "--seed", "1"], a.path());
    run(&["iterate", "--config", cfg.to_str().unwrap(), "--seed", "2"], b.path());
    assert_ne!(manifest(a.path())["config_sha256"], manifest(b.path())["config_sha256"]);
    let env = |d: &Path| std::fs::read_to_string(d.join("env.csv")).unwrap();
    assert_ne!(env(a.path()), env(b.path()));
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = config("atom_brw.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(&["brw-sim", "--config", cfg.to_str().unwrap(), "--threads", "1"], a.path()).status.success());
    assert!(run(&["brw-sim", "--config", cfg.to_str().unwrap(), "--threads", "3"], b.path()).status.success());
    assert_eq!(manifest(a.path())["outputs"], manifest(b.path())["outputs"]);
}

#[test]
fn oracle_check_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("atom_brw.json");
    let o = run(&["oracle-check", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["result"]["pass"], true);
    assert_eq!(v["result"]["sup_fixture_error"], 0.0);
}

#[test]
fn json_format_writes_json_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("plus_minus_walk.json");
    let o = run(&["walk", "--config", cfg.to_str().unwrap(), "--format", "json"], dir.path());
    assert!(o.status.success());
    let sums: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("tail_sums.json")).unwrap()).unwrap();
    assert_eq!(sums.as_array().unwrap().len(), 60);
    assert_eq!(sums[0]["n"], 1);
}

#[test]
fn unknown_config_field_is_a_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"seed": 1, "colour": "red"}"#).unwrap();
    let o = run(&["classify", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let v = stdout_json(&o);
    assert_eq!(v["error"]["kind"], "config");
    assert!(dir.path().join("out/error.json").exists());
}

#[test]
fn missing_seed_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("noseed.json");
    let law = r#"{"law": {"states": [{"id": "s", "kind": "finite", "prob": 1, "outcomes": [{"p": 1, "weights": [0.5, 0.5]}]}]}}"#;
    std::fs::write(&cfg, law).unwrap();
    let o = run(&["iterate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout_json(&o)["error"]["message"].as_str().unwrap().contains("seed"));
}

#[test]
fn unknown_environment_state_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("env.json");
    let text = r#"{"law": {"states": [{"id": "s", "kind": "finite", "prob": 1, "outcomes": [{"p": 1, "weights": [0.5, 0.5]}]}]},
                  "env": ["s", "t"], "seed": 1}"#;
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["iterate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout_json(&o)["error"]["kind"], "unknown_state");
}

#[test]
fn brw_verdict_recovers_classical_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("binary_gaussian.json");
    let o = run(&["brw-verdict", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let v = stdout_json(&o);
    let rows = v["result"].as_array().unwrap();
    assert_eq!(rows[0]["verdict"], "MEAN_ONE");
    assert_eq!(rows[1]["verdict"], "DEGENERATE");
    let at = |t: f64| rows.iter().find(|r| r["theta"] == t).unwrap()["verdict"].clone();
    assert_eq!(at(1.15), "MEAN_ONE");
    assert_eq!(at(1.2), "DEGENERATE");
}

#[test]
fn report_aggregates_both_laws() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("atom_brw.json");
    let o = run(&["report", "--config", cfg.to_str().unwrap(), "--format", "json"], dir.path());
    assert!(o.status.success());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(r["classify"]["verdict"], "UNIQUE_L1");
    assert_eq!(r["brw_verdict"][0]["verdict"], "MEAN_ONE");
}
