//! Round-by-round active learning driver.
//!
//! The benchmark harness and the annotation service both drive the same
//! [`ActiveLearner`]; only the source of labels differs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{initial_indices, propose_batch, AcquisitionBatch, AcquisitionConfig, PoolState, Strategy};
use crate::ensemble::{EncodedPool, Ensemble, EnsembleConfig, PriorMode, TrainConfig, TrainingReport};
use crate::error::{Error, Result};
use crate::harness::Dataset;
use crate::hdc::Encoder;
use crate::rng::{self, purpose};

/// Everything that determines one learning trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub strategy: Strategy,
    pub batch_size: usize,
    pub n_init: usize,
    pub gamma: f64,
    pub seed: u64,
    pub label_budget: Option<usize>,
    pub ensemble: EnsembleConfig,
    pub train: TrainConfig,
}

impl LearnerConfig {
    /// Training settings actually used for this strategy. The naive margin
    /// baseline trains a single prior-free classifier.
    pub fn effective_train(&self) -> TrainConfig {
        let mut train = self.train.clone();
        train.seed = rng::derive(self.seed, &[purpose::PRIOR]);
        if self.strategy == Strategy::MarginNaive {
            train.prior_mode = PriorMode::None;
            train.bootstrap = false;
        }
        train
    }

    pub fn effective_members(&self) -> usize {
        if self.strategy == Strategy::MarginNaive {
            1
        } else {
            self.ensemble.members
        }
    }

    pub fn acquisition(&self) -> AcquisitionConfig {
        AcquisitionConfig {
            strategy: self.strategy,
            batch_size: self.batch_size,
            gamma: self.gamma,
            n_init: self.n_init,
            seed: self.seed,
        }
    }

    pub fn budget(&self, pool_size: usize) -> usize {
        self.label_budget.unwrap_or(2000).min(pool_size)
    }
}

/// One point of a learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub labeled_count: usize,
    pub test_accuracy: f64,
    /// Wall time of the acquisition that produced this labeled set.
    pub acq_seconds: f64,
}

/// Resumable learner state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub pool: PoolState,
    pub curve: Vec<CurvePoint>,
    pub pending: Option<AcquisitionBatch>,
    /// Present when the encoder or priors may have drifted from their
    /// seeded initial values, or when trained models must be kept.
    pub ensemble: Option<Ensemble>,
}

pub struct ActiveLearner {
    config: LearnerConfig,
    ensemble: Ensemble,
    pool: PoolState,
    encoded: EncodedPool,
    truth: Vec<usize>,
    raw: Vec<Vec<f64>>,
    test: EncodedPool,
    test_labels: Vec<usize>,
    curve: Vec<CurvePoint>,
    pending: Option<AcquisitionBatch>,
    last_report: Option<TrainingReport>,
}

impl ActiveLearner {
    /// Fits the encoder on the training pool and encodes both splits.
    pub fn new(dataset: &Dataset, config: LearnerConfig) -> Result<Self> {
        config.acquisition().validate()?;
        if dataset.train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let raw: Vec<Vec<f64>> = dataset.train.iter().map(|&i| dataset.features[i].clone()).collect();
        let truth: Vec<usize> = dataset.train.iter().map(|&i| dataset.labels[i]).collect();
        let encoder = Encoder::fit(
            &raw,
            config.ensemble.dim,
            config.ensemble.bandwidth,
            rng::derive(config.seed, &[purpose::ENCODER]),
        )?;
        let ensemble = Ensemble::new(
            dataset.num_classes(),
            config.effective_members(),
            encoder,
            config.effective_train(),
        )?;
        let encoded = EncodedPool::new(&ensemble, &raw)?;
        let test_rows: Vec<&[f64]> = dataset.test.iter().map(|&i| dataset.features[i].as_slice()).collect();
        let test = EncodedPool::new(&ensemble, &test_rows)?;
        let test_labels = dataset.test.iter().map(|&i| dataset.labels[i]).collect();
        Ok(Self {
            pool: PoolState::new(raw.len()),
            config,
            ensemble,
            encoded,
            truth,
            raw,
            test,
            test_labels,
            curve: Vec::new(),
            pending: None,
            last_report: None,
        })
    }

    /// Rebuilds a learner from a saved state.
    pub fn restore(dataset: &Dataset, config: LearnerConfig, state: LearnerState) -> Result<Self> {
        let mut learner = Self::new(dataset, config)?;
        if state.pool.size() != learner.pool.size() {
            return Err(Error::Config(format!(
                "saved pool has {} samples, dataset has {}",
                state.pool.size(),
                learner.pool.size()
            )));
        }
        learner.pool = state.pool;
        learner.curve = state.curve;
        learner.pending = state.pending;
        match state.ensemble {
            Some(ensemble) => {
                learner.ensemble = ensemble;
                learner.encoded.sync(&learner.ensemble)?;
                learner.test.sync(&learner.ensemble)?;
            }
            // Training is a pure function of the labeled set and round, so
            // the model is rebuilt rather than stored.
            None if !learner.pool.labeled().is_empty() => learner.fit()?,
            None => {}
        }
        Ok(learner)
    }

    pub fn state(&self, include_ensemble: bool) -> LearnerState {
        let drifted = self.config.train.regen.is_some();
        LearnerState {
            pool: self.pool.clone(),
            curve: self.curve.clone(),
            pending: self.pending.clone(),
            ensemble: (include_ensemble || drifted).then(|| self.ensemble.clone()),
        }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn pool(&self) -> &PoolState {
        &self.pool
    }

    pub fn encoded(&self) -> &EncodedPool {
        &self.encoded
    }

    pub fn curve(&self) -> &[CurvePoint] {
        &self.curve
    }

    pub fn pending(&self) -> Option<&AcquisitionBatch> {
        self.pending.as_ref()
    }

    pub fn last_report(&self) -> Option<&TrainingReport> {
        self.last_report.as_ref()
    }

    /// Raw (un-normalized) features of a pool sample.
    pub fn raw_features(&self, index: usize) -> &[f64] {
        &self.raw[index]
    }

    /// Hidden ground truth for simulated labeling.
    pub fn truth(&self) -> &[usize] {
        &self.truth
    }

    pub fn budget(&self) -> usize {
        self.config.budget(self.pool.size())
    }

    /// True once the label budget is spent or the pool is empty.
    pub fn is_done(&self) -> bool {
        let labeled = self.pool.labeled().len();
        labeled > 0 && (labeled >= self.budget() || self.pool.unlabeled_len() == 0)
    }

    /// Makes the seeded initial set the pending batch, if nothing is labeled yet.
    pub fn begin(&mut self) -> &AcquisitionBatch {
        if self.pending.is_none() && self.pool.labeled().is_empty() {
            let indices = initial_indices(self.pool.size(), self.config.n_init.max(1), self.config.seed);
            self.pending = Some(AcquisitionBatch {
                scores: vec![0.0; indices.len()],
                pseudo_labels: vec![0; indices.len()],
                indices,
                ..AcquisitionBatch::default()
            });
        }
        self.pending.as_ref().expect("pending batch present")
    }

    /// Selects the next batch, capped by the remaining label budget.
    pub fn propose(&mut self) -> Result<&AcquisitionBatch> {
        if self.pending.is_none() {
            let remaining = self.budget().saturating_sub(self.pool.labeled().len());
            let mut acq = self.config.acquisition();
            acq.batch_size = acq.batch_size.min(remaining.max(1));
            let batch = propose_batch(&self.pool, &self.encoded, &self.ensemble, &acq)?;
            self.pending = Some(batch);
        }
        Ok(self.pending.as_ref().expect("pending batch present"))
    }

    /// Labels the pending batch and moves it into the labeled set.
    pub fn commit(&mut self, labels: &[usize]) -> Result<()> {
        let batch = self.pending.as_ref().ok_or_else(|| Error::Config("no pending batch".into()))?;
        let classes = self.ensemble.num_classes();
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label: bad, classes });
        }
        self.pool.commit(&batch.indices, labels)?;
        self.pending = None;
        Ok(())
    }

    /// Retrains from scratch on the labeled set, evaluates on the test split
    /// and appends a curve point.
    pub fn train_and_evaluate(&mut self, acq_seconds: f64) -> Result<&CurvePoint> {
        self.fit()?;
        let round = self.pool.round();
        let labeled_count = self.pool.labeled().len();
        let test_accuracy = accuracy(&self.ensemble, &self.test, &self.test_labels);
        self.curve.push(CurvePoint {
            round,
            labeled_count,
            test_accuracy,
            acq_seconds,
        });
        Ok(self.curve.last().expect("just pushed"))
    }
}

impl ActiveLearner {
    fn fit(&mut self) -> Result<()> {
        let round = self.pool.round();
        let seed = rng::derive(self.config.seed, &[purpose::FIT, round as u64]);
        let labeled = self.pool.labeled().to_vec();
        let report = self.ensemble.fit(&mut self.encoded, &labeled, seed)?;
        self.last_report = Some(report);
        self.test.sync(&self.ensemble)
    }
}

/// Fraction of `pool` whose ensemble vote matches `labels`. An empty pool
/// scores 0.
pub fn accuracy(ensemble: &Ensemble, pool: &EncodedPool, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct: usize = (0..pool.len())
        .into_par_iter()
        .map(|i| usize::from(ensemble.predict(&pool.query(i)).0 == labels[i]))
        .sum();
    correct as f64 / labels.len() as f64
}
