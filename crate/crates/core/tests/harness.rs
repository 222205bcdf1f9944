use std::path::{Path, PathBuf};

use nodeflow::harness::{
    missing_manifest_files, run_endpoint_experiment, run_trajectory_experiment, strip_wall_clock, ExperimentConfig,
    ResultTable, RowStatus, RunOptions, SweepSpec, RESULTS_FILE,
};
use nodeflow::Error;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).unwrap()
}

fn results_text(dir: &Path) -> String {
    std::fs::read_to_string(dir.join(RESULTS_FILE)).unwrap()
}

const NEURAL: &str = r#"{
    "seed": 3,
    "n_particles": 40,
    "initial": {"kind": "uniform-ball", "center": [0, 0], "radius": 1},
    "target": {
        "kind": "neural",
        "field": {"activation": "tanh", "terms": [{"A": [[0, -1], [1, 0]], "W": [[1, 0.5], [-0.5, 1]], "theta": [0.1, -0.2]}]},
        "region": {"kind": "ball", "center": [0, 0], "radius": 4}
    },
    "horizon": 1,
    "sweep": {"n_avg": [1], "m": [2], "n_osc": [1, 4]},
    "fit_tolerance": 0.01,
    "fit": {"activation": "tanh"},
    "integrator": {"snapshots": 11}
}"#;

#[test]
fn shipped_configs_parse() {
    for name in ["rotation_sweep.json", "translation_endpoint.json", "moons_to_mixture.json", "zero_field.json"] {
        load(name);
    }
}

#[test]
fn zero_field_rows_have_zero_error() {
    let cfg = load("zero_field.json");
    let dir = tempfile::tempdir().unwrap();
    let out = run_trajectory_experiment(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(out.table.len(), 4);
    assert_eq!(out.exit_code(), 0);
    for r in out.table.rows() {
        assert!(r.sup_w2.unwrap() <= 1e-9 && r.final_w2.unwrap() <= 1e-9, "{r:?}");
        assert_eq!(r.pieces, Some(r.n_avg));
    }
    assert!(missing_manifest_files(&out.manifest, dir.path()).is_empty());
    assert_eq!(
        results_text(dir.path()).lines().next().unwrap(),
        "n_avg,m,n_osc,sup_w2,final_w2,max_fit_err,pieces,wall_s,status"
    );
}

#[test]
fn admissible_target_is_tracked_to_integrator_accuracy() {
    let cfg = ExperimentConfig::from_json(NEURAL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_trajectory_experiment(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(out.table.len(), 2);
    for r in out.table.rows() {
        assert_eq!(r.status, RowStatus::Ok);
        assert!(r.sup_w2.unwrap() < 1e-3, "{r:?}");
    }
}

#[test]
fn manifest_lists_each_coordinate_once() {
    let cfg = load("zero_field.json");
    let dir = tempfile::tempdir().unwrap();
    let out = run_trajectory_experiment(&cfg, &RunOptions::new(dir.path())).unwrap();
    let mut keys: Vec<_> = out.manifest.rows.iter().map(|r| (r.n_avg, r.m, r.n_osc)).collect();
    keys.dedup();
    assert_eq!(keys, cfg.sweep.points());
    let on_disk: nodeflow::harness::Manifest = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(on_disk, out.manifest);
}

#[test]
fn reruns_and_thread_counts_give_identical_tables() {
    let cfg = ExperimentConfig::from_json(NEURAL).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_trajectory_experiment(&cfg, &RunOptions::new(a.path())).unwrap();
    run_trajectory_experiment(&cfg, &RunOptions::new(b.path()).with_threads(Some(1))).unwrap();
    assert_eq!(strip_wall_clock(&results_text(a.path())), strip_wall_clock(&results_text(b.path())));
}

#[test]
fn resume_recomputes_only_missing_rows() {
    let cfg = load("zero_field.json");
    let fresh = tempfile::tempdir().unwrap();
    run_trajectory_experiment(&cfg, &RunOptions::new(fresh.path())).unwrap();

    let partial = tempfile::tempdir().unwrap();
    let first = run_trajectory_experiment(&cfg, &RunOptions::new(partial.path())).unwrap();
    // simulate an interrupted run: drop two rows from the table and one row directory
    let kept = ResultTable::from_rows(first.table.rows()[..2].iter().cloned());
    kept.save(&partial.path().join(RESULTS_FILE)).unwrap();
    std::fs::remove_dir_all(partial.path().join("rows").join(first.table.rows()[3].key())).unwrap();

    let resumed = run_trajectory_experiment(&cfg, &RunOptions::new(partial.path()).with_resume(true)).unwrap();
    for r in kept.rows() {
        assert_eq!(resumed.table.get(r.coords()).unwrap().wall_s, r.wall_s);
    }
    assert_eq!(
        strip_wall_clock(&results_text(fresh.path())),
        strip_wall_clock(&results_text(partial.path()))
    );
    assert!(missing_manifest_files(&resumed.manifest, partial.path()).is_empty());
}

#[test]
fn resume_refuses_a_different_config() {
    let cfg = load("zero_field.json");
    let dir = tempfile::tempdir().unwrap();
    run_trajectory_experiment(&cfg, &RunOptions::new(dir.path())).unwrap();
    let mut other = cfg.clone();
    other.seed += 1;
    let err = run_trajectory_experiment(&other, &RunOptions::new(dir.path()).with_resume(true)).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn failed_rows_do_not_abort_the_sweep() {
    let mut cfg = load("zero_field.json");
    cfg.sweep = SweepSpec {
        n_avg: vec![1],
        m: vec![1000],
        n_osc: vec![1, 2000],
    };
    let dir = tempfile::tempdir().unwrap();
    let out = run_trajectory_experiment(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(out.table.get((1, 1000, 1)).unwrap().status, RowStatus::Ok);
    assert_eq!(out.table.get((1, 1000, 2000)).unwrap().status, RowStatus::Failed);
    assert_eq!(out.exit_code(), 3);
    let report = std::fs::read_to_string(dir.path().join("rows/navg1_m1000_nosc2000/report.json")).unwrap();
    assert!(report.contains("size error"), "{report}");
    assert!(results_text(dir.path()).contains("1,1000,2000,,,,,"));

    cfg.sweep.n_osc = vec![2000];
    let dir = tempfile::tempdir().unwrap();
    let out = run_trajectory_experiment(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(out.exit_code(), 2);
}

#[test]
fn runners_check_target_kind() {
    let dir = tempfile::tempdir().unwrap();
    let endpoint = load("translation_endpoint.json");
    assert!(matches!(
        run_trajectory_experiment(&endpoint, &RunOptions::new(dir.path())),
        Err(Error::Config(_))
    ));
    let field = load("zero_field.json");
    assert!(matches!(
        run_endpoint_experiment(&field, &RunOptions::new(dir.path())),
        Err(Error::Config(_))
    ));
}

#[test]
fn identical_endpoint_measures_give_zero_final_error() {
    let mut cfg = load("translation_endpoint.json");
    cfg.target = serde_json::from_str(r#"{"kind": "translated-initial", "shift": [0, 0], "bandwidth": 0.5}"#).unwrap();
    cfg.sweep = SweepSpec {
        n_avg: vec![1],
        m: vec![8],
        n_osc: vec![2],
    };
    let dir = tempfile::tempdir().unwrap();
    let out = run_endpoint_experiment(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(out.table.rows()[0].final_w2, Some(0.0));
    assert_eq!(out.manifest.reference_final_w2, Some(0.0));
}

#[test]
fn moons_reach_the_mixture_within_epsilon() {
    // largest sweep point only; the full sweep lives in the shipped config
    let mut cfg = load("moons_to_mixture.json");
    cfg.sweep = SweepSpec {
        n_avg: vec![8],
        m: vec![128],
        n_osc: vec![32],
    };
    let dir = tempfile::tempdir().unwrap();
    let out = run_endpoint_experiment(&cfg, &RunOptions::new(dir.path())).unwrap();
    let row = &out.table.rows()[0];
    assert!(row.status.completed());
    let fin = row.final_w2.unwrap();
    assert!(fin < cfg.epsilon.unwrap(), "final W2 {fin}");
    // the displacement stand-in itself leaves a kernel-smoothing gap
    assert!(fin < 0.2, "final W2 {fin}");
}

#[test]
fn published_schema_matches_config_keys() {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config_path("experiment.schema.json")).unwrap()).unwrap();
    let mut cfg = load("moons_to_mixture.json");
    cfg.epsilon = Some(0.1);
    cfg.output_dir = Some("out".into());
    let value = serde_json::to_value(&cfg).unwrap();
    let keys = |v: &serde_json::Value| {
        let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    };
    assert_eq!(keys(&schema["properties"]), keys(&value));
    for section in ["sweep", "integrator"] {
        assert_eq!(keys(&schema["properties"][section]["properties"]), keys(&value[section]), "{section}");
    }
    let mut fit = keys(&value["fit"]);
    fit.push("seed_terms".into());
    fit.sort();
    assert_eq!(keys(&schema["properties"]["fit"]["properties"]), fit);
}
