use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nodeflow"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, n_osc: &str) -> PathBuf {
    let text = std::fs::read_to_string(config("zero_field.json"))
        .unwrap()
        .replace("\"m\": [4]", "\"m\": [1000]")
        .replace("\"n_osc\": [1, 3]", &format!("\"n_osc\": {n_osc}"))
        .replace("\"n_avg\": [1, 2]", "\"n_avg\": [1]");
    let path = dir.join("cfg.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sweep_writes_results_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = config("zero_field.json");
    let res = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 9);

    let again = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "9",
        "--resume",
        "--parallel",
        "1",
    ]);
    assert_eq!(code(&again), 0);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(config("zero_field.json")).unwrap().replace("\"seed\"", "\"sede\"");
    std::fs::write(&bad, text).unwrap();
    let res = run(&["sweep", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("config error"));

    let missing = run(&["sweep", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(code(&missing), 1);

    let field = config("zero_field.json");
    let wrong_kind = run(&["endpoint", "--config", field.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&wrong_kind), 1);
}

#[test]
fn row_failures_set_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let partial = write_config(dir.path(), "[1, 2000]");
    let out = dir.path().join("partial");
    let res = run(&["sweep", "--config", partial.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 3);

    let all = write_config(dir.path(), "[2000]");
    let out = dir.path().join("all");
    let res = run(&["sweep", "--config", all.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
}

#[test]
fn synthesize_simulate_compare_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("zero_field.json");
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = run(&["synthesize", "--config", cfg, "--out", out, "--point", "2,4,3"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let schedule = dir.path().join("schedule.json");
    let sched: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&schedule).unwrap()).unwrap();
    assert_eq!(sched["pieces"].as_array().unwrap().len(), 2);

    let res = run(&["simulate", "--config", cfg, "--out", out, "--schedule", schedule.to_str().unwrap()]);
    assert_eq!(code(&res), 0);
    assert!(dir.path().join("trajectory/trajectory.json").exists());
    assert!(dir.path().join("trajectory/snap_10.csv").exists());

    let res = run(&["compare", "--config", cfg, "--out", out, "--schedule", schedule.to_str().unwrap()]);
    assert_eq!(code(&res), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("compare.json")).unwrap()).unwrap();
    assert_eq!(summary["sup_w2"], 0.0);

    let bad_point = run(&["synthesize", "--config", cfg, "--out", out, "--point", "1,2"]);
    assert_ne!(code(&bad_point), 0);
}
