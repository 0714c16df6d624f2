use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::Dataset;
use super::export::{curve_file_name, read_curve, state_file_name, write_curve, write_timing};
use super::metrics::{pairwise_matrix, PENALTY_RULE};
use crate::acquisition::{Oracle, SimulatedOracle, Strategy};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::learner::{ActiveLearner, CurvePoint, LearnerState};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAIRWISE_FILE: &str = "pairwise.csv";

/// Accuracy of one strategy under one seed, one point per acquisition round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub dataset: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn labeled_counts(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.labeled_count).collect()
    }

    /// Test accuracy at the first point with at least `labeled` labels.
    pub fn accuracy_at(&self, labeled: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.labeled_count >= labeled)
            .map(|p| p.test_accuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Incomplete,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub strategy: Strategy,
    pub seed: u64,
    pub status: RunStatus,
    pub rounds: usize,
    pub labeled_count: usize,
    pub curve_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Index of a run directory. Holds no timestamps so that repeated runs
/// produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub dataset: String,
    pub pool_size: usize,
    pub test_size: usize,
    pub classes: usize,
    pub seeds: Vec<u64>,
    pub penalty_rule: String,
    pub config: RunConfig,
    pub runs: Vec<RunEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
    }

    fn store(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn entry(&self, strategy: Strategy, seed: u64) -> Option<&RunEntry> {
        self.runs.iter().find(|r| r.strategy == strategy && r.seed == seed)
    }

    pub fn is_complete(&self) -> bool {
        self.runs.iter().all(|r| r.status == RunStatus::Complete)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads for the run. `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Continue from persisted state instead of starting over.
    pub resume: bool,
    /// Stop each run after this many rounds, leaving it resumable.
    pub max_rounds: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub curves: Vec<LearningCurve>,
}

/// Runs every (strategy, seed) pair of `config` and writes curves, timings
/// and a manifest under the output directory.
///
/// Each round is persisted atomically, so an interrupted run continues from
/// its last completed round when `options.resume` is set. A failing pair is
/// marked `failed` in the manifest without affecting the others.
pub fn run_learning_curve(config: &RunConfig, base_dir: &Path, options: &RunOptions) -> Result<RunOutcome> {
    config.validate()?;
    let dataset = config.load_dataset(base_dir)?;
    let out = config.output_dir(base_dir);
    std::fs::create_dir_all(out.join("state")).map_err(|e| Error::io(&out, e))?;

    let previous = if options.resume {
        Manifest::load(&out).ok()
    } else {
        None
    };
    if previous.as_ref().is_some_and(|m| m.config != *config) {
        return Err(Error::Config(format!(
            "{} was written by a different config; refusing to resume",
            out.display()
        )));
    }
    let seeds = config.seeds();
    let jobs: Vec<(Strategy, u64)> = seeds
        .iter()
        .flat_map(|&seed| config.strategies.iter().map(move |&s| (s, seed)))
        .collect();
    let runs = jobs
        .iter()
        .map(|&(strategy, seed)| {
            previous
                .as_ref()
                .and_then(|m| m.entry(strategy, seed))
                .filter(|e| e.status == RunStatus::Complete)
                .cloned()
                .unwrap_or(RunEntry {
                    strategy,
                    seed,
                    status: RunStatus::Incomplete,
                    rounds: 0,
                    labeled_count: 0,
                    curve_file: curve_file_name(strategy, seed),
                    error: None,
                })
        })
        .collect();
    let manifest = Mutex::new(Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        dataset: dataset.name.clone(),
        pool_size: dataset.train.len(),
        test_size: dataset.test.len(),
        classes: dataset.num_classes(),
        seeds,
        penalty_rule: PENALTY_RULE.to_string(),
        config: config.clone(),
        runs,
    });
    manifest.lock().expect("manifest lock").store(&out)?;

    let execute = || {
        jobs.par_iter()
            .map(|&(strategy, seed)| {
                let done = manifest
                    .lock()
                    .expect("manifest lock")
                    .entry(strategy, seed)
                    .is_some_and(|e| e.status == RunStatus::Complete);
                let result = if done {
                    read_curve(&out, &dataset.name, strategy, seed).map(|c| (c, true))
                } else {
                    run_one(config, &dataset, &out, strategy, seed, options)
                };
                let mut m = manifest.lock().expect("manifest lock");
                let entry = m
                    .runs
                    .iter_mut()
                    .find(|r| r.strategy == strategy && r.seed == seed)
                    .expect("entry exists");
                match &result {
                    Ok((curve, finished)) => {
                        entry.status = if *finished {
                            RunStatus::Complete
                        } else {
                            RunStatus::Incomplete
                        };
                        entry.rounds = curve.points.len();
                        entry.labeled_count = curve.points.last().map_or(0, |p| p.labeled_count);
                        entry.error = None;
                    }
                    Err(e) => {
                        entry.status = RunStatus::Failed;
                        entry.error = Some(e.to_string());
                    }
                }
                m.store(&out)?;
                Ok(result.ok().map(|(curve, _)| curve))
            })
            .collect::<Result<Vec<Option<LearningCurve>>>>()
    };
    let curves = match options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(execute)?,
        None => execute()?,
    };
    let curves: Vec<LearningCurve> = curves.into_iter().flatten().collect();
    let manifest = manifest.into_inner().expect("manifest lock");
    if manifest.is_complete() && config.strategies.len() > 1 {
        let matrix = pairwise_matrix(&curves, &config.strategies)?;
        write_atomic(&out.join(PAIRWISE_FILE), matrix.to_csv().as_bytes())?;
    }
    Ok(RunOutcome {
        output_dir: out,
        manifest,
        curves,
    })
}

/// Drives one (strategy, seed) pair to its budget. Returns the curve and
/// whether the run finished.
fn run_one(
    config: &RunConfig,
    dataset: &Dataset,
    out: &Path,
    strategy: Strategy,
    seed: u64,
    options: &RunOptions,
) -> Result<(LearningCurve, bool)> {
    let learner_config = config.learner(strategy, seed);
    let state_path = out.join("state").join(state_file_name(strategy, seed));
    let mut learner = match (options.resume, state_path.exists()) {
        (true, true) => {
            let bytes = std::fs::read(&state_path).map_err(|e| Error::io(&state_path, e))?;
            let state: LearnerState = bincode::deserialize(&bytes).map_err(|e| Error::format(&state_path, e))?;
            ActiveLearner::restore(dataset, learner_config, state)?
        }
        _ => ActiveLearner::new(dataset, learner_config)?,
    };
    let mut oracle = SimulatedOracle::new(learner.truth().to_vec());
    let mut rounds = 0;
    while !learner.is_done() {
        if options.max_rounds.is_some_and(|m| rounds >= m) {
            break;
        }
        let started = Instant::now();
        let indices = if learner.pool().labeled().is_empty() {
            learner.begin().indices.clone()
        } else {
            learner.propose()?.indices.clone()
        };
        let acq_seconds = started.elapsed().as_secs_f64();
        let labels = oracle.label(&indices)?;
        learner.commit(&labels)?;
        learner.train_and_evaluate(acq_seconds)?;
        persist(out, &state_path, dataset, strategy, seed, &learner)?;
        rounds += 1;
    }
    let curve = LearningCurve {
        dataset: dataset.name.clone(),
        strategy,
        seed,
        points: learner.curve().to_vec(),
    };
    Ok((curve, learner.is_done()))
}

fn persist(
    out: &Path,
    state_path: &Path,
    dataset: &Dataset,
    strategy: Strategy,
    seed: u64,
    learner: &ActiveLearner,
) -> Result<()> {
    let curve = LearningCurve {
        dataset: dataset.name.clone(),
        strategy,
        seed,
        points: learner.curve().to_vec(),
    };
    write_curve(out, &curve)?;
    write_timing(out, &curve)?;
    let bytes = bincode::serialize(&learner.state(false)).expect("state serializes");
    write_atomic(state_path, &bytes)
}
