use std::fs;
use std::path::Path;

use hdal_core::harness::{
    import_results, run_learning_curve, Manifest, RunConfig, RunOptions, RunStatus, MANIFEST_FILE, PAIRWISE_FILE,
};
use hdal_core::Strategy;

const CONFIG: &str = r#"
strategies = ["random", "heal", "heal_diverse"]
batch_size = 20
n_init = 20
seeds = [0, 1]
label_budget = 100
output = "out"

[dataset]
kind = "blobs"
classes = 4
features = 8
train_per_class = 50
test_per_class = 20
seed = 9

[ensemble]
dim = 512
members = 4
bandwidth = 0.35
"#;

fn setup(text: &str) -> (tempfile::TempDir, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), text).unwrap();
    let config = RunConfig::from_path(&dir.path().join("run.toml")).unwrap();
    (dir, config)
}

fn metric_files(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| !n.starts_with("timing_"))
        .map(|n| {
            let bytes = fs::read(out.join(&n)).unwrap();
            (n, bytes)
        })
        .collect();
    files.sort();
    files
}

#[test]
fn budget_arithmetic_and_outputs() {
    let (dir, config) = setup(CONFIG);
    let outcome = run_learning_curve(&config, dir.path(), &RunOptions::default()).unwrap();
    assert!(outcome.manifest.is_complete());
    assert_eq!(outcome.curves.len(), 6);
    for curve in &outcome.curves {
        assert_eq!(curve.labeled_counts(), vec![20, 40, 60, 80, 100]);
        let rounds: Vec<usize> = curve.points.iter().map(|p| p.round).collect();
        assert_eq!(rounds, vec![1, 2, 3, 4, 5]);
    }
    let out = dir.path().join("out");
    assert!(out.join(MANIFEST_FILE).exists());
    assert!(out.join(PAIRWISE_FILE).exists());
    assert!(out.join("curve_heal_seed1.csv").exists());
    assert!(out.join("timing_heal_seed1.csv").exists());

    let (manifest, curves) = import_results(&out).unwrap();
    assert_eq!(manifest, outcome.manifest);
    for c in &outcome.curves {
        assert!(curves.contains(c), "{:?} {} did not round-trip", c.strategy, c.seed);
    }
}

#[test]
fn protocol_fairness_shared_initial_set() {
    let (dir, config) = setup(CONFIG);
    let outcome = run_learning_curve(&config, dir.path(), &RunOptions::default()).unwrap();
    for seed in [0, 1] {
        let first: Vec<f64> = outcome
            .curves
            .iter()
            .filter(|c| c.seed == seed)
            .map(|c| c.points[0].test_accuracy)
            .collect();
        // Same seed, same initial labeled set, same model: identical first point.
        assert!(first.windows(2).all(|w| w[0] == w[1]), "{first:?}");
    }
}

#[test]
fn manifest_echoes_config() {
    let (dir, config) = setup(CONFIG);
    run_learning_curve(&config, dir.path(), &RunOptions::default()).unwrap();
    let manifest = Manifest::load(&dir.path().join("out")).unwrap();
    assert_eq!(manifest.config, config);
    let text = fs::read_to_string(dir.path().join("out").join(MANIFEST_FILE)).unwrap();
    for key in [
        "strategies",
        "batch_size",
        "n_init",
        "repeats",
        "seeds",
        "label_budget",
        "duplication_factor",
        "output",
        "learning_rate",
        "max_epochs",
        "target_train_accuracy",
        "bootstrap",
        "prior_mode",
        "gamma",
        "dim",
        "members",
        "bandwidth",
        "code_version",
        "penalty_rule",
    ] {
        assert!(text.contains(&format!("\"{key}\"")), "manifest lacks {key}");
    }
}

#[test]
fn deterministic_across_worker_counts() {
    let (a, config) = setup(CONFIG);
    let (b, _) = setup(CONFIG);
    run_learning_curve(&config, a.path(), &RunOptions { workers: Some(1), ..Default::default() }).unwrap();
    run_learning_curve(&config, b.path(), &RunOptions { workers: Some(4), ..Default::default() }).unwrap();
    assert_eq!(metric_files(&a.path().join("out")), metric_files(&b.path().join("out")));
}

#[test]
fn interrupted_run_resumes_remaining_rounds_only() {
    let (full_dir, config) = setup(CONFIG);
    let full = run_learning_curve(&config, full_dir.path(), &RunOptions::default()).unwrap();

    let (dir, _) = setup(CONFIG);
    let partial = run_learning_curve(
        &config,
        dir.path(),
        &RunOptions {
            max_rounds: Some(2),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(partial.manifest.runs.iter().all(|r| r.status == RunStatus::Incomplete && r.rounds == 2));
    let out = dir.path().join("out");
    let early_timing = fs::read_to_string(out.join("timing_heal_seed0.csv")).unwrap();

    let resumed = run_learning_curve(
        &config,
        dir.path(),
        &RunOptions {
            resume: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(resumed.manifest.is_complete());
    assert_eq!(metric_files(&out), metric_files(&full_dir.path().join("out")));
    // Rounds completed before the interruption were not re-run.
    let timing = fs::read_to_string(out.join("timing_heal_seed0.csv")).unwrap();
    assert!(timing.starts_with(&early_timing));

    // Resuming a finished run is a no-op.
    let again = run_learning_curve(&config, dir.path(), &RunOptions { resume: true, ..Default::default() }).unwrap();
    assert_eq!(again.curves.len(), full.curves.len());
    assert_eq!(fs::read_to_string(out.join("timing_heal_seed0.csv")).unwrap(), timing);
}

#[test]
fn failed_run_is_isolated() {
    let (dir, config) = setup(CONFIG);
    run_learning_curve(&config, dir.path(), &RunOptions { max_rounds: Some(1), ..Default::default() }).unwrap();
    fs::write(dir.path().join("out/state/heal_seed1.bin"), b"garbage").unwrap();
    let outcome = run_learning_curve(&config, dir.path(), &RunOptions { resume: true, ..Default::default() }).unwrap();
    let heal1 = outcome.manifest.entry(Strategy::Heal, 1).unwrap();
    assert_eq!(heal1.status, RunStatus::Failed);
    assert!(heal1.error.is_some());
    let complete = outcome
        .manifest
        .runs
        .iter()
        .filter(|r| r.status == RunStatus::Complete)
        .count();
    assert_eq!(complete, 5);
    assert!(!outcome.manifest.is_complete());
    assert!(!dir.path().join("out").join(PAIRWISE_FILE).exists());
}

#[test]
fn resume_with_changed_config_is_refused() {
    let (dir, config) = setup(CONFIG);
    run_learning_curve(&config, dir.path(), &RunOptions { max_rounds: Some(1), ..Default::default() }).unwrap();
    let mut changed = config.clone();
    changed.batch_size = 10;
    let err = run_learning_curve(&changed, dir.path(), &RunOptions { resume: true, ..Default::default() }).unwrap_err();
    assert!(err.to_string().contains("refusing to resume"));
}

#[test]
fn regeneration_run_resumes_identically() {
    let text = format!("{CONFIG}\n[train]\nregen = {{ every_epochs = 2, fraction = 0.1 }}\n")
        .replace("\"random\", \"heal\", \"heal_diverse\"", "\"heal\"")
        .replace("seeds = [0, 1]", "seeds = [3]");
    let (full_dir, config) = setup(&text);
    run_learning_curve(&config, full_dir.path(), &RunOptions::default()).unwrap();
    let (dir, _) = setup(&text);
    run_learning_curve(&config, dir.path(), &RunOptions { max_rounds: Some(3), ..Default::default() }).unwrap();
    run_learning_curve(&config, dir.path(), &RunOptions { resume: true, ..Default::default() }).unwrap();
    assert_eq!(metric_files(&dir.path().join("out")), metric_files(&full_dir.path().join("out")));
}
