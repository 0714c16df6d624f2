use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PoolState;
use crate::ensemble::{argmax, average, margin, EncodedPool, Ensemble, PriorMode, VoteDistribution};
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Uniform random acquisition, the non-active baseline.
    Random,
    /// Lowest vote confidence first.
    Confidence,
    /// Highest vote entropy first.
    Entropy,
    /// Similarity margin of a single prior-free classifier.
    MarginNaive,
    /// Ensemble-averaged similarity margin.
    Heal,
    /// Ensemble margin with the per-class memory diversity filter.
    HealDiverse,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Random,
        Strategy::Confidence,
        Strategy::Entropy,
        Strategy::MarginNaive,
        Strategy::Heal,
        Strategy::HealDiverse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Confidence => "confidence",
            Strategy::Entropy => "entropy",
            Strategy::MarginNaive => "margin_naive",
            Strategy::Heal => "heal",
            Strategy::HealDiverse => "heal_diverse",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub strategy: Strategy,
    pub batch_size: usize,
    pub gamma: f64,
    pub n_init: usize,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Heal,
            batch_size: 20,
            gamma: 0.4,
            n_init: 20,
            seed: 0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in [-1, 1], got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Acquisition score of one unlabeled sample. Higher is acquired first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub index: usize,
    pub score: f64,
    pub pseudo_label: usize,
}

/// Scores every unlabeled sample, in ascending index order.
///
/// `seed` only feeds the random strategy, whose draws depend on the seed,
/// round and sample index and never on the model.
pub fn score_pool(
    pool: &PoolState,
    encoded: &EncodedPool,
    ensemble: &Ensemble,
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<Assessment>> {
    if encoded.len() != pool.size() {
        return Err(Error::Config(format!(
            "pool has {} samples but {} encodings",
            pool.size(),
            encoded.len()
        )));
    }
    if !encoded.is_current(ensemble) {
        return Err(Error::Config("pool encodings are stale for this ensemble".into()));
    }
    let round = pool.round() as u64;
    let indices: Vec<usize> = pool.unlabeled().collect();
    let classes = ensemble.num_classes();
    Ok(indices
        .par_iter()
        .map(|&index| {
            let q = encoded.query(index);
            let (score, pseudo_label) = match strategy {
                Strategy::Random => (rng::unit_hash(seed, &[purpose::RANDOM_SCORE, round, index as u64]), 0),
                Strategy::MarginNaive => {
                    let scores = ensemble.submodel_scores_with(0, &q, PriorMode::None);
                    (margin(&scores), argmax(&scores))
                }
                _ => {
                    let member_scores = ensemble.all_scores(&q);
                    let votes = member_scores.iter().map(|s| argmax(s)).collect();
                    let dist = VoteDistribution::from_votes(votes, classes);
                    let score = match strategy {
                        Strategy::Confidence => -dist.max_prob(),
                        Strategy::Entropy => dist.entropy(),
                        _ => margin(&average(&member_scores, classes)),
                    };
                    (score, dist.mode())
                }
            };
            Assessment {
                index,
                score,
                pseudo_label,
            }
        })
        .collect())
}
