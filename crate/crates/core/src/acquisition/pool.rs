use std::collections::BTreeSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// Labeling authority for acquired samples.
pub trait Oracle {
    /// Labels for `indices`, in the same order.
    fn label(&mut self, indices: &[usize]) -> Result<Vec<usize>>;
}

/// Answers from held-back ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    truth: Vec<usize>,
}

impl SimulatedOracle {
    pub fn new(truth: Vec<usize>) -> Self {
        Self { truth }
    }
}

impl Oracle for SimulatedOracle {
    fn label(&mut self, indices: &[usize]) -> Result<Vec<usize>> {
        indices
            .iter()
            .map(|&i| {
                self.truth.get(i).copied().ok_or_else(|| Error::Oracle {
                    index: i,
                    reason: "no ground truth for this index".into(),
                })
            })
            .collect()
    }
}

/// Seed-determined initial labeled set, ascending.
pub fn initial_indices(pool_size: usize, n_init: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, &[purpose::INIT_SET]);
    let n = n_init.min(pool_size);
    let mut picked = index::sample(&mut r, pool_size, n).into_vec();
    picked.sort_unstable();
    picked
}

/// Partition of the pool into labeled and unlabeled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    size: usize,
    /// (pool index, label) in acquisition order.
    labeled: Vec<(usize, usize)>,
    unlabeled: BTreeSet<usize>,
    round: usize,
}

impl PoolState {
    /// Everything unlabeled.
    pub fn new(size: usize) -> Self {
        Self {
            size,
            labeled: Vec::new(),
            unlabeled: (0..size).collect(),
            round: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labeled(&self) -> &[(usize, usize)] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.unlabeled.iter().copied()
    }

    pub fn unlabeled_len(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn is_unlabeled(&self, index: usize) -> bool {
        self.unlabeled.contains(&index)
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Moves `indices` to the labeled set and advances the round.
    /// Validates everything before changing anything.
    pub fn commit(&mut self, indices: &[usize], labels: &[usize]) -> Result<()> {
        if indices.len() != labels.len() {
            return Err(Error::Config(format!(
                "{} indices but {} labels",
                indices.len(),
                labels.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for &i in indices {
            if !self.unlabeled.contains(&i) || !seen.insert(i) {
                return Err(Error::NotInPool(i));
            }
        }
        for (&i, &l) in indices.iter().zip(labels) {
            self.unlabeled.remove(&i);
            self.labeled.push((i, l));
        }
        self.round += 1;
        Ok(())
    }
}
