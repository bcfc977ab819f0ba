use pdaccel::harness::{
    reference_solve_cached, run_experiment, run_suite, ExperimentConfig, RunStatus, Suite,
};
use pdaccel::problems::ProblemSpec;
use pdaccel::record::read_csv_file;

fn config(json: &str, dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(json).unwrap();
    cfg.output.dir = Some(dir.to_path_buf());
    cfg
}

#[test]
fn ecqp_run_writes_full_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"problem": {"family": "ecqp", "m": 20, "n": 500, "seed": 0},
            "solver": {"algorithm": "lalm", "schedule": {"kind": "adaptive"}}}"#,
        dir.path(),
    );
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.summary.status, RunStatus::Ok);
    let csv = out.summary.csv.clone().unwrap();
    let rows = read_csv_file(&csv).unwrap();
    assert_eq!(rows.len(), 1000);
    assert_eq!(rows, out.record.unwrap().rows);
    assert!(dir.path().join(format!("{}.json", cfg.name())).exists());
}

#[test]
fn tv_summary_reports_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"problem": {"family": "tv", "size": 32, "noise": 0.1, "mu": 0.04, "seed": 2},
            "solver": {"algorithm": "ladmm", "schedule": {"kind": "preset", "preset": "accelerated_admm"}},
            "run": {"max_iter": 200, "checks": false}}"#,
        dir.path(),
    );
    let s = run_experiment(&cfg).unwrap().summary;
    assert_eq!(s.status, RunStatus::Ok);
    assert_eq!(s.iterations, 200);
    let (noisy, out) = (s.psnr_noisy.unwrap(), s.psnr.unwrap());
    assert!(out > noisy, "{noisy} -> {out}");
    assert!(s.psnr_last.is_some());
}

#[test]
fn invalid_schedule_is_reported_without_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"problem": {"family": "ecqp", "m": 5, "n": 20, "seed": 0},
            "solver": {"algorithm": "lalm", "schedule": {"kind": "constant", "beta": 1.0, "gamma": 2.0}}}"#,
        dir.path(),
    );
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.summary.status, RunStatus::ConfigError);
    assert!(out.summary.error.is_some());
    assert!(out.record.is_none());
    assert!(out.summary.csv.is_none());
    assert!(!dir.path().join(format!("{}.csv", cfg.name())).exists());
    assert!(dir.path().join(format!("{}.json", cfg.name())).exists());
}

#[test]
fn unknown_config_fields_are_rejected() {
    let bad = r#"{"problem": {"family": "ecqp", "m": 5, "n": 20, "seed": 0},
                  "solver": {"algorithm": "fista"}, "runs": {}}"#;
    assert!(ExperimentConfig::from_json(bad).is_err());
}

#[test]
fn reference_cache_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ProblemSpec::TwoBlockQp {
        m: 4,
        n: 10,
        seed: 3,
    };
    let inst = spec.build().unwrap();
    let a = reference_solve_cached(&spec, &inst, 1e-9, Some(dir.path())).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    let b = reference_solve_cached(&spec, &inst, 1e-9, Some(dir.path())).unwrap();
    assert_eq!(a.value().to_bits(), b.value().to_bits());
}

#[test]
fn suite_runs_every_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let suite: Suite = serde_json::from_str(
        r#"{"experiments": [
              {"problem": {"family": "nnqp", "m": 5, "n": 120, "seed": 1, "dist": "uniform"},
               "solver": {"algorithm": "fista"}, "run": {"max_iter": 50, "restart_every": 50}},
              {"problem": {"family": "nnqp", "m": 5, "n": 120, "seed": 1, "dist": "uniform"},
               "solver": {"algorithm": "lalm", "schedule": {"kind": "adaptive"}},
               "run": {"max_iter": 50, "restart_every": 50}}
           ]}"#,
    )
    .unwrap();
    let suite = Suite {
        output_dir: Some(dir.path().to_path_buf()),
        ..suite
    };
    let out = run_suite(&suite).unwrap();
    assert_eq!(out.len(), 2);
    assert!(out.iter().all(|s| s.status == RunStatus::Ok));
    assert!(dir.path().join("summary.json").exists());
}
