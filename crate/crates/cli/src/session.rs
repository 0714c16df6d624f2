//! Labeling sessions: one active learner driven by labels that arrive over
//! HTTP, persisted after every transition.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use hdal_core::ensemble::{EnsembleConfig, TrainConfig};
use hdal_core::harness::{AcquisitionSection, DatasetSpec, LearningCurve, RunConfig};
use hdal_core::learner::{ActiveLearner, LearnerState};
use hdal_core::Strategy;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionError {
    NotFound(String),
    Conflict(String),
    Invalid(String),
    Internal(String),
}

impl std::fmt::Display for SessionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SessionError::NotFound(m) | SessionError::Conflict(m) | SessionError::Invalid(m) | SessionError::Internal(m) => {
                f.write_str(m)
            }
        }
    }
}

impl std::error::Error for SessionError {}

type Result<T> = std::result::Result<T, SessionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingLabels,
    Training,
    Idle,
    Finished,
}

/// Body of `POST /sessions`. Omitted fields take the benchmark defaults, so
/// a session and a one-strategy, one-seed run config agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    pub dataset_ref: DatasetSpec,
    pub strategy: Strategy,
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    pub n_init: usize,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_budget: Option<usize>,
    #[serde(default = "default_duplication")]
    pub duplication_factor: usize,
}

fn default_gamma() -> f64 {
    AcquisitionSection::default().gamma
}

fn default_duplication() -> usize {
    1
}

impl SessionRequest {
    /// The equivalent benchmark config.
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            dataset: self.dataset_ref.clone(),
            strategies: vec![self.strategy],
            batch_size: self.k,
            n_init: self.n_init,
            repeats: 1,
            seeds: Some(vec![self.seed]),
            label_budget: self.label_budget,
            duplication_factor: self.duplication_factor,
            output: PathBuf::new(),
            ensemble: self.ensemble.clone(),
            train: self.train.clone(),
            acquisition: AcquisitionSection { gamma: self.gamma },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleView {
    pub index: usize,
    /// Raw feature values in the dataset's original units.
    pub features: Vec<f64>,
    /// Absent for the seeded initial batch, which no model has seen.
    pub pseudo_label: Option<usize>,
    pub score: Option<f64>,
    /// Label already accepted for this sample, if any.
    pub label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchView {
    pub round: usize,
    pub samples: Vec<SampleView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelEntry {
    pub index: usize,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsBody {
    pub labels: Vec<LabelEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub accepted: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusView {
    pub status: SessionStatus,
    pub round: usize,
    pub labeled_count: usize,
    pub latest_test_accuracy: Option<f64>,
}

/// On-disk form of a session.
#[derive(Debug, Serialize, Deserialize)]
struct SessionFile {
    id: String,
    request: SessionRequest,
    status: SessionStatus,
    learner: LearnerState,
    accepted: Vec<(usize, usize)>,
    pending_acq_seconds: f64,
}

pub struct Session {
    id: String,
    request: SessionRequest,
    dataset_name: String,
    learner: ActiveLearner,
    status: SessionStatus,
    accepted: BTreeMap<usize, usize>,
    pending_acq_seconds: f64,
    path: PathBuf,
}

pub fn session_file(state_dir: &Path, id: &str) -> PathBuf {
    state_dir.join(format!("{id}.json"))
}

fn internal(e: impl std::fmt::Display) -> SessionError {
    SessionError::Internal(e.to_string())
}

impl Session {
    /// Builds a new idle session. Relative dataset paths resolve against `data_dir`.
    pub fn create(id: String, request: SessionRequest, data_dir: &Path, state_dir: &Path) -> Result<Self> {
        let config = request.run_config();
        config.validate().map_err(|e| SessionError::Invalid(e.to_string()))?;
        let dataset = config.load_dataset(data_dir).map_err(|e| SessionError::Invalid(e.to_string()))?;
        let learner = ActiveLearner::new(&dataset, config.learner(request.strategy, request.seed))
            .map_err(|e| SessionError::Invalid(e.to_string()))?;
        let session = Session {
            path: session_file(state_dir, &id),
            id,
            request,
            dataset_name: dataset.name,
            learner,
            status: SessionStatus::Idle,
            accepted: BTreeMap::new(),
            pending_acq_seconds: 0.0,
        };
        session.persist()?;
        Ok(session)
    }

    /// Reloads a persisted session. A session interrupted while training
    /// finishes that training step first.
    pub fn load(path: &Path, data_dir: &Path) -> anyhow::Result<Self> {
        let bytes = fs::read(path)?;
        let file: SessionFile = serde_json::from_slice(&bytes)?;
        let config = file.request.run_config();
        let dataset = config.load_dataset(data_dir)?;
        let learner = ActiveLearner::restore(
            &dataset,
            config.learner(file.request.strategy, file.request.seed),
            file.learner,
        )?;
        let mut session = Session {
            id: file.id,
            request: file.request,
            dataset_name: dataset.name,
            learner,
            status: file.status,
            accepted: file.accepted.into_iter().collect(),
            pending_acq_seconds: file.pending_acq_seconds,
            path: path.to_path_buf(),
        };
        if session.status == SessionStatus::Training {
            session.finish_training()?;
            session.persist()?;
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn request(&self) -> &SessionRequest {
        &self.request
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    /// The pending batch, selecting a new one when the session is idle.
    pub fn batch(&mut self) -> Result<BatchView> {
        match self.status {
            SessionStatus::Finished => return Err(SessionError::Conflict("session is finished".into())),
            SessionStatus::Training => return Err(internal("session is mid-training")),
            SessionStatus::AwaitingLabels => {}
            SessionStatus::Idle => {
                let started = Instant::now();
                if self.learner.pool().labeled().is_empty() {
                    self.learner.begin();
                } else {
                    self.learner.propose().map_err(internal)?;
                }
                self.pending_acq_seconds = started.elapsed().as_secs_f64();
                self.status = SessionStatus::AwaitingLabels;
                self.persist()?;
            }
        }
        Ok(self.batch_view())
    }

    fn batch_view(&self) -> BatchView {
        let batch = self.learner.pending().expect("awaiting labels implies a pending batch");
        let initial = self.learner.pool().labeled().is_empty();
        let samples = batch
            .indices
            .iter()
            .enumerate()
            .map(|(j, &index)| SampleView {
                index,
                features: self.learner.raw_features(index).to_vec(),
                pseudo_label: (!initial).then(|| batch.pseudo_labels[j]),
                score: (!initial).then(|| batch.scores[j]),
                label: self.accepted.get(&index).copied(),
            })
            .collect();
        BatchView {
            round: self.learner.pool().round() + 1,
            samples,
        }
    }

    /// Accepts labels for pending samples. The request is all-or-nothing;
    /// the batch is committed and the model retrained once every pending
    /// sample has a label.
    pub fn submit(&mut self, labels: &[LabelEntry]) -> Result<SubmitResponse> {
        if self.status != SessionStatus::AwaitingLabels {
            return Err(SessionError::Conflict("no pending batch; request one first".into()));
        }
        let pending: BTreeSet<usize> = self
            .learner
            .pending()
            .expect("awaiting labels implies a pending batch")
            .indices
            .iter()
            .copied()
            .collect();
        let classes = self.learner.ensemble().num_classes();
        let mut seen = BTreeSet::new();
        for entry in labels {
            if !pending.contains(&entry.index) {
                return Err(SessionError::Conflict(format!("sample {} is not in the pending batch", entry.index)));
            }
            if entry.label >= classes {
                return Err(SessionError::Invalid(format!(
                    "label {} out of range for {classes} classes",
                    entry.label
                )));
            }
            if !seen.insert(entry.index) {
                return Err(SessionError::Invalid(format!("sample {} labeled twice", entry.index)));
            }
        }

        let before = self.accepted.clone();
        self.accepted.extend(labels.iter().map(|e| (e.index, e.label)));
        if let Err(e) = self.persist() {
            self.accepted = before;
            return Err(e);
        }
        let remaining = pending.len() - self.accepted.len();
        if remaining == 0 {
            self.status = SessionStatus::Training;
            self.persist()?;
            self.finish_training().map_err(internal)?;
            self.persist()?;
        }
        Ok(SubmitResponse {
            accepted: labels.len(),
            remaining,
        })
    }

    fn finish_training(&mut self) -> hdal_core::Result<()> {
        let indices = self.learner.pending().expect("training implies a pending batch").indices.clone();
        let labels: Vec<usize> = indices.iter().map(|i| self.accepted[i]).collect();
        self.learner.commit(&labels)?;
        self.learner.train_and_evaluate(self.pending_acq_seconds)?;
        self.accepted.clear();
        self.pending_acq_seconds = 0.0;
        self.status = if self.learner.is_done() {
            SessionStatus::Finished
        } else {
            SessionStatus::Idle
        };
        Ok(())
    }

    pub fn status_view(&self) -> StatusView {
        let completed = self.learner.pool().round();
        StatusView {
            status: self.status,
            round: if self.status == SessionStatus::Finished {
                completed
            } else {
                completed + 1
            },
            labeled_count: self.learner.pool().labeled().len(),
            latest_test_accuracy: self.learner.curve().last().map(|p| p.test_accuracy),
        }
    }

    pub fn curve(&self) -> LearningCurve {
        LearningCurve {
            dataset: self.dataset_name.clone(),
            strategy: self.request.strategy,
            seed: self.request.seed,
            points: self.learner.curve().to_vec(),
        }
    }

    fn persist(&self) -> Result<()> {
        let file = SessionFile {
            id: self.id.clone(),
            request: self.request.clone(),
            status: self.status,
            learner: self.learner.state(false),
            accepted: self.accepted.iter().map(|(&i, &l)| (i, l)).collect(),
            pending_acq_seconds: self.pending_acq_seconds,
        };
        let bytes = serde_json::to_vec(&file).map_err(internal)?;
        write_durable(&self.path, &bytes).map_err(|e| internal(format!("persisting {}: {e}", self.path.display())))
    }
}

/// Writes through a synced temporary file and renames it into place.
fn write_durable(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        // Directory fsync is unsupported on some platforms; the rename is
        // still atomic there.
        let _ = fs::File::open(dir).and_then(|d| d.sync_all());
    }
    Ok(())
}
