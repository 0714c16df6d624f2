use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::{EncodedPool, Query};
use super::config::{PriorMode, TrainConfig};
use super::regen::{neuralhd_regenerate, RegenEvent};
use super::votes::{argmax, top_two, VoteDistribution};
use crate::error::{Error, Result};
use crate::hdc::{similarity_from_parts, Encoder, Hypervector};
use crate::rng::{self, purpose};

/// One ensemble member: trainable class accumulators plus static priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubModel {
    model: Vec<Hypervector>,
    model_norms: Vec<f64>,
    prior: Vec<Hypervector>,
    prior_norms: Vec<f64>,
    combined_norms: Vec<f64>,
}

impl SubModel {
    fn new<R: Rng + ?Sized>(classes: usize, dim: usize, rng: &mut R) -> Self {
        let prior: Vec<Hypervector> = (0..classes)
            .map(|_| Hypervector::random_gaussian(dim, rng))
            .collect();
        let prior_norms: Vec<f64> = prior.iter().map(Hypervector::norm).collect();
        Self {
            model: vec![Hypervector::zeros(dim); classes],
            model_norms: vec![0.0; classes],
            combined_norms: prior_norms.clone(),
            prior,
            prior_norms,
        }
    }

    pub fn model(&self) -> &[Hypervector] {
        &self.model
    }

    pub fn prior(&self) -> &[Hypervector] {
        &self.prior
    }

    pub fn model_norms(&self) -> &[f64] {
        &self.model_norms
    }

    pub fn prior_norms(&self) -> &[f64] {
        &self.prior_norms
    }

    fn reset(&mut self) {
        for m in &mut self.model {
            m.fill_zero();
        }
        self.model_norms.fill(0.0);
        self.combined_norms.clone_from(&self.prior_norms);
    }

    pub(crate) fn refresh_norms(&mut self, class: usize) {
        let m = &self.model[class];
        let p = &self.prior[class];
        self.model_norms[class] = m.norm();
        self.prior_norms[class] = p.norm();
        let mut sum = 0.0;
        for d in 0..m.dim() {
            let (mr, mi) = m.get(d);
            let (pr, pi) = p.get(d);
            sum += (mr + pr) * (mr + pr) + (mi + pi) * (mi + pi);
        }
        self.combined_norms[class] = sum.sqrt();
    }

    pub(crate) fn model_mut(&mut self) -> &mut [Hypervector] {
        &mut self.model
    }

    pub(crate) fn prior_mut(&mut self) -> &mut [Hypervector] {
        &mut self.prior
    }

    /// Writes the per-class score of `h` into `out`.
    ///
    /// `prior_dots` holds this member's cached `real(h · mᵖ†)` per class;
    /// when absent the prior term is computed directly.
    pub fn scores_into(&self, h: &Hypervector, h_norm: f64, prior_dots: Option<&[f64]>, mode: PriorMode, out: &mut [f64]) {
        for (l, slot) in out.iter_mut().enumerate() {
            let model_dot = if self.model_norms[l] == 0.0 {
                0.0
            } else {
                h.dot_re(&self.model[l])
            };
            let prior_dot = || match prior_dots {
                Some(dots) => dots[l],
                None => h.dot_re(&self.prior[l]),
            };
            *slot = match mode {
                PriorMode::None => similarity_from_parts(model_dot, h_norm, self.model_norms[l]),
                PriorMode::Isolated => {
                    similarity_from_parts(model_dot, h_norm, self.model_norms[l])
                        + similarity_from_parts(prior_dot(), h_norm, self.prior_norms[l])
                }
                PriorMode::Combined => {
                    similarity_from_parts(model_dot + prior_dot(), h_norm, self.combined_norms[l])
                }
            };
        }
    }

    /// `m_class ← m_class ⊕ coefficient·h`.
    fn update(&mut self, class: usize, h: &Hypervector, coefficient: f64) {
        self.model[class].add_scaled(h, coefficient);
        self.refresh_norms(class);
    }

    /// One pass over `samples` in a shuffled order. Returns the fraction of
    /// samples predicted correctly before their update.
    fn run_epoch<R: Rng + ?Sized>(
        &mut self,
        member: usize,
        pool: &EncodedPool,
        samples: &[(usize, usize)],
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> f64 {
        let classes = self.model.len();
        let mut order = samples.to_vec();
        order.shuffle(rng);
        let mut scores = vec![0.0; classes];
        let mut correct = 0usize;
        for &(idx, label) in &order {
            let q = pool.query(idx);
            let dots = q.prior_dots.map(|d| &d[member * classes..(member + 1) * classes]);
            self.scores_into(q.h, q.norm, dots, cfg.prior_mode, &mut scores);
            let pred = argmax(&scores);
            if pred == label {
                correct += 1;
                continue;
            }
            let lr = cfg.learning_rate;
            self.update(label, q.h, lr * (1.0 - scores[label]));
            self.update(pred, q.h, lr * (scores[pred] - 1.0));
        }
        correct as f64 / order.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Epochs run by each member in its last training stretch.
    pub epochs: Vec<usize>,
    /// Final epoch accuracy of each member on its own training sample.
    pub train_accuracy: Vec<f64>,
    /// Total epochs of the outer loop.
    pub total_epochs: usize,
    pub regen_events: Vec<RegenEvent>,
}

/// An ensemble of HDC classifiers sharing a single encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    encoder: Encoder,
    submodels: Vec<SubModel>,
    num_classes: usize,
    config: TrainConfig,
}

impl Ensemble {
    /// Zero class hypervectors and Gaussian priors drawn from `config.seed`.
    pub fn new(num_classes: usize, members: usize, encoder: Encoder, config: TrainConfig) -> Result<Self> {
        if members == 0 {
            return Err(Error::Config("ensemble needs at least one member".into()));
        }
        if num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
        }
        config.validate()?;
        let dim = encoder.dim();
        let submodels = (0..members)
            .map(|i| {
                let mut r = rng::stream(config.seed, &[purpose::PRIOR, i as u64]);
                SubModel::new(num_classes, dim, &mut r)
            })
            .collect();
        Ok(Self {
            encoder,
            submodels,
            num_classes,
            config,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub(crate) fn encoder_mut(&mut self) -> &mut Encoder {
        &mut self.encoder
    }

    pub fn submodels(&self) -> &[SubModel] {
        &self.submodels
    }

    pub(crate) fn submodels_mut(&mut self) -> &mut [SubModel] {
        &mut self.submodels
    }

    pub fn members(&self) -> usize {
        self.submodels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.encoder.dim()
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn prior_mode(&self) -> PriorMode {
        self.config.prior_mode
    }

    /// Bit patterns of every prior hypervector, for exact comparisons.
    pub fn prior_fingerprint(&self) -> Vec<u64> {
        self.submodels
            .iter()
            .flat_map(|s| s.prior.iter().flat_map(|p| p.bits()))
            .collect()
    }

    fn member_dots<'q>(&self, q: &Query<'q>, member: usize) -> Option<&'q [f64]> {
        let c = self.num_classes;
        q.prior_dots.map(|d| &d[member * c..(member + 1) * c])
    }

    /// Score of every class under one member, using the ensemble's prior mode.
    pub fn submodel_scores(&self, member: usize, q: &Query<'_>) -> Vec<f64> {
        self.submodel_scores_with(member, q, self.config.prior_mode)
    }

    pub fn submodel_scores_with(&self, member: usize, q: &Query<'_>, mode: PriorMode) -> Vec<f64> {
        let mut out = vec![0.0; self.num_classes];
        self.submodels[member].scores_into(q.h, q.norm, self.member_dots(q, member), mode, &mut out);
        out
    }

    /// Single score `S(h, m_class)` of one member.
    pub fn combined_score(&self, member: usize, class: usize, q: &Query<'_>) -> f64 {
        self.submodel_scores(member, q)[class]
    }

    /// Argmax over one member's scores, lowest class on ties.
    pub fn predict_submodel(&self, member: usize, q: &Query<'_>) -> (usize, Vec<f64>) {
        let scores = self.submodel_scores(member, q);
        (argmax(&scores), scores)
    }

    /// Every member's score vector, in member order.
    pub fn all_scores(&self, q: &Query<'_>) -> Vec<Vec<f64>> {
        (0..self.members()).map(|i| self.submodel_scores(i, q)).collect()
    }

    /// Majority vote and vote distribution.
    pub fn predict(&self, q: &Query<'_>) -> (usize, VoteDistribution) {
        let votes = (0..self.members())
            .map(|i| self.predict_submodel(i, q).0)
            .collect();
        let dist = VoteDistribution::from_votes(votes, self.num_classes);
        (dist.mode(), dist)
    }

    /// Per-class mean of member scores.
    pub fn average_scores(&self, q: &Query<'_>) -> Vec<f64> {
        average(&self.all_scores(q), self.num_classes)
    }

    /// `S_avg(runner-up) − S_avg(top)`; never positive, zero on a tie.
    pub fn margin_score(&self, q: &Query<'_>) -> f64 {
        margin(&self.average_scores(q))
    }

    /// Trains every member from zero on `labeled` (pool index, label) pairs.
    ///
    /// With a regeneration schedule the encoder, priors, and `pool`
    /// are updated in place.
    pub fn fit(&mut self, pool: &mut EncodedPool, labeled: &[(usize, usize)], seed: u64) -> Result<TrainingReport> {
        if labeled.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        for &(idx, label) in labeled {
            if label >= self.num_classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: self.num_classes,
                });
            }
            if idx >= pool.len() {
                return Err(Error::NotInPool(idx));
            }
        }
        if !pool.is_current(self) {
            pool.sync(self)?;
        }
        let cfg = self.config.clone();
        let members = self.members();
        let samples: Vec<Vec<(usize, usize)>> = (0..members)
            .map(|i| {
                if cfg.bootstrap {
                    let mut r = rng::stream(seed, &[purpose::BOOTSTRAP, i as u64]);
                    (0..labeled.len())
                        .map(|_| labeled[r.gen_range(0..labeled.len())])
                        .collect()
                } else {
                    labeled.to_vec()
                }
            })
            .collect();
        for sub in &mut self.submodels {
            sub.reset();
        }

        let mut active = vec![true; members];
        let mut epochs = vec![0usize; members];
        let mut accuracy = vec![0.0; members];
        let mut regen_events = Vec::new();
        let mut total_epochs = 0;
        for epoch in 1..=cfg.max_epochs {
            if !active.iter().any(|&a| a) {
                break;
            }
            total_epochs = epoch;
            let shared: &EncodedPool = pool;
            self.submodels
                .par_iter_mut()
                .zip(samples.par_iter())
                .zip(active.par_iter_mut().zip(epochs.par_iter_mut().zip(accuracy.par_iter_mut())))
                .enumerate()
                .for_each(|(i, ((sub, own), (act, (ep, acc))))| {
                    if !*act {
                        return;
                    }
                    let mut r = rng::stream(seed, &[purpose::SHUFFLE, i as u64, epoch as u64]);
                    *acc = sub.run_epoch(i, shared, own, &cfg, &mut r);
                    *ep += 1;
                    if *acc >= cfg.target_train_accuracy {
                        *act = false;
                    }
                });
            if let Some(regen) = cfg.regen {
                let due = epoch % regen.every_epochs == 0 && epoch < cfg.max_epochs;
                if due && active.iter().any(|&a| a) && regen.fraction > 0.0 {
                    let mut r = rng::stream(seed, &[purpose::REGEN, epoch as u64]);
                    let event = neuralhd_regenerate(self, pool, regen.fraction, &mut r)?;
                    if !event.dims.is_empty() {
                        active.fill(true);
                        epochs.fill(0);
                    }
                    regen_events.push(event);
                }
            }
        }
        Ok(TrainingReport {
            epochs,
            train_accuracy: accuracy,
            total_epochs,
            regen_events,
        })
    }

    /// Trains on standalone encodings. Regeneration is not available here.
    pub fn fit_encoded(&mut self, encodings: &[Hypervector], labels: &[usize], seed: u64) -> Result<TrainingReport> {
        if encodings.len() != labels.len() {
            return Err(Error::Config(format!(
                "{} encodings but {} labels",
                encodings.len(),
                labels.len()
            )));
        }
        if self.config.regen.is_some() {
            return Err(Error::Config("regeneration needs a pool built from raw features".into()));
        }
        let mut pool = EncodedPool::from_encodings(self, encodings.to_vec())?;
        let labeled: Vec<(usize, usize)> = labels.iter().copied().enumerate().collect();
        self.fit(&mut pool, &labeled, seed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid checkpoint: {e}")))
    }

    /// Writes a JSON checkpoint that reloads bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, format!("invalid checkpoint: {e}")))
    }
}

/// Per-class mean of member score vectors, summed in member order.
pub fn average(member_scores: &[Vec<f64>], classes: usize) -> Vec<f64> {
    let mut avg = vec![0.0; classes];
    for scores in member_scores {
        for (a, s) in avg.iter_mut().zip(scores) {
            *a += s;
        }
    }
    let e = member_scores.len() as f64;
    avg.iter_mut().for_each(|a| *a /= e);
    avg
}

/// Runner-up minus top.
pub fn margin(scores: &[f64]) -> f64 {
    let (top, second) = top_two(scores);
    scores[second] - scores[top]
}
