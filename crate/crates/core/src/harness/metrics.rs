use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{ood_fixture_spec, Dataset};
use super::runner::LearningCurve;
use crate::acquisition::Strategy;
use crate::ensemble::{EncodedPool, Ensemble, EnsembleConfig, PriorMode, TrainConfig};
use crate::error::{Error, Result};
use crate::hdc::Encoder;
use crate::learner::accuracy;
use crate::rng::{self, purpose};

/// Human-readable statement of the rule implemented by [`pairwise_matrix`],
/// echoed into run manifests.
pub const PENALTY_RULE: &str = "penalty[Y][X] = fraction of (dataset, labeled_count) checkpoints at which \
the mean over seeds of the paired accuracy difference acc(X) - acc(Y) is positive and exceeds two \
standard errors (sample standard deviation / sqrt(seeds))";

/// Row strategy Y is penalized by column strategy X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub strategies: Vec<Strategy>,
    pub penalty: Vec<Vec<f64>>,
}

impl ComparisonMatrix {
    pub fn get(&self, row: Strategy, col: Strategy) -> Option<f64> {
        let r = self.strategies.iter().position(|&s| s == row)?;
        let c = self.strategies.iter().position(|&s| s == col)?;
        Some(self.penalty[r][c])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy");
        for s in &self.strategies {
            write!(out, ",{s}").unwrap();
        }
        out.push('\n');
        for (s, row) in self.strategies.iter().zip(&self.penalty) {
            out.push_str(s.as_str());
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn mean_and_se(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    if diffs.len() < 2 {
        return (mean, 0.0);
    }
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pairwise penalty matrix over `strategies` (see [`PENALTY_RULE`]).
///
/// Within each dataset every strategy must have curves for the same seeds,
/// and every curve the same labeled counts.
pub fn pairwise_matrix(curves: &[LearningCurve], strategies: &[Strategy]) -> Result<ComparisonMatrix> {
    // dataset -> strategy -> seed -> curve
    let mut grouped: BTreeMap<&str, BTreeMap<Strategy, BTreeMap<u64, &LearningCurve>>> = BTreeMap::new();
    for c in curves {
        if strategies.contains(&c.strategy) {
            grouped
                .entry(c.dataset.as_str())
                .or_default()
                .entry(c.strategy)
                .or_default()
                .insert(c.seed, c);
        }
    }
    let s = strategies.len();
    let mut wins = vec![vec![0usize; s]; s];
    let mut checkpoints_total = 0usize;
    for (dataset, by_strategy) in &grouped {
        let mut seeds: Option<BTreeSet<u64>> = None;
        let mut counts: Option<Vec<usize>> = None;
        for st in strategies {
            let runs = by_strategy
                .get(st)
                .ok_or_else(|| Error::MismatchedCheckpoints(format!("{dataset}: no curves for {st}")))?;
            let these: BTreeSet<u64> = runs.keys().copied().collect();
            if seeds.get_or_insert_with(|| these.clone()) != &these {
                return Err(Error::MismatchedCheckpoints(format!("{dataset}: {st} has different seeds")));
            }
            for curve in runs.values() {
                let lc = curve.labeled_counts();
                if counts.get_or_insert_with(|| lc.clone()) != &lc {
                    return Err(Error::MismatchedCheckpoints(format!(
                        "{dataset}: {st} seed {} has different labeled counts",
                        curve.seed
                    )));
                }
            }
        }
        let points = counts.unwrap_or_default().len();
        checkpoints_total += points;
        for p in 0..points {
            for (y, sy) in strategies.iter().enumerate() {
                for (x, sx) in strategies.iter().enumerate() {
                    if x == y {
                        continue;
                    }
                    let diffs: Vec<f64> = by_strategy[sx]
                        .iter()
                        .map(|(seed, cx)| cx.points[p].test_accuracy - by_strategy[sy][seed].points[p].test_accuracy)
                        .collect();
                    let (mean, se) = mean_and_se(&diffs);
                    if mean > 0.0 && mean > 2.0 * se {
                        wins[y][x] += 1;
                    }
                }
            }
        }
    }
    let penalty = wins
        .iter()
        .map(|row| {
            row.iter()
                .map(|&w| {
                    if checkpoints_total == 0 {
                        0.0
                    } else {
                        w as f64 / checkpoints_total as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok(ComparisonMatrix {
        strategies: strategies.to_vec(),
        penalty,
    })
}

/// Predictive entropy histograms over a shared bin grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyHistogram {
    /// `bins + 1` ascending edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub in_dist_counts: Vec<usize>,
    pub ood_counts: Vec<usize>,
    pub in_dist_mean: f64,
    pub ood_mean: f64,
}

impl EntropyHistogram {
    pub fn gap(&self) -> f64 {
        self.ood_mean - self.in_dist_mean
    }

    pub fn to_csv(&self, label: &str) -> String {
        let mut out = String::from("mode,bin_lo,bin_hi,in_dist_count,ood_count\n");
        for (b, w) in self.edges.windows(2).enumerate() {
            writeln!(out, "{label},{},{},{},{}", w[0], w[1], self.in_dist_counts[b], self.ood_counts[b]).unwrap();
        }
        out
    }
}

fn entropies(ensemble: &Ensemble, pool: &EncodedPool) -> Vec<f64> {
    (0..pool.len())
        .into_par_iter()
        .map(|i| ensemble.predict(&pool.query(i)).1.entropy())
        .collect()
}

fn bin_counts(values: &[f64], upper: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in values {
        let b = if upper > 0.0 {
            ((v / upper * bins as f64) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    counts
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Bins the vote entropies of both pools over `[0, ln min(E, C)]`, the
/// range entropy can take.
pub fn entropy_histogram(ensemble: &Ensemble, in_dist: &EncodedPool, ood: &EncodedPool, bins: usize) -> Result<EntropyHistogram> {
    if bins == 0 {
        return Err(Error::Config("bins must be at least 1".into()));
    }
    let h_in = entropies(ensemble, in_dist);
    let h_ood = entropies(ensemble, ood);
    let upper = (ensemble.members().min(ensemble.num_classes()) as f64).ln();
    let edges = (0..=bins).map(|b| upper * b as f64 / bins as f64).collect();
    Ok(EntropyHistogram {
        edges,
        in_dist_counts: bin_counts(&h_in, upper, bins),
        ood_counts: bin_counts(&h_ood, upper, bins),
        in_dist_mean: mean(&h_in),
        ood_mean: mean(&h_ood),
    })
}

/// Settings of the out-of-distribution entropy experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub seeds: Vec<u64>,
    pub bins: usize,
    pub output: Option<std::path::PathBuf>,
    pub ensemble: EnsembleConfig,
    pub train: TrainConfig,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            bins: 20,
            output: None,
            ensemble: EnsembleConfig {
                dim: 2000,
                members: 8,
                // Scale-free width: z-scored inputs of n features sit about
                // sqrt(2n) apart, so 1/sqrt(n) keeps the kernel width fixed.
                bandwidth: 1.0 / (ood_fixture_spec(0).features as f64).sqrt(),
            },
            train: TrainConfig::default(),
        }
    }
}

impl EntropyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: EntropyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.train.validate()?;
        if config.seeds.is_empty() || config.bins == 0 {
            return Err(Error::Config("seeds and bins must be non-empty".into()));
        }
        Ok(config)
    }
}

/// Result of one OOD experiment under one prior mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodOutcome {
    pub seed: u64,
    pub prior_mode: PriorMode,
    pub in_dist_accuracy: f64,
    pub histogram: EntropyHistogram,
}

/// Trains an ensemble on the whole training split of `in_dist` and
/// histograms entropies of both test splits.
pub fn ood_entropy_experiment(
    in_dist: &Dataset,
    ood: &Dataset,
    seed: u64,
    prior_mode: PriorMode,
    ensemble_cfg: &EnsembleConfig,
    train_cfg: &TrainConfig,
    bins: usize,
) -> Result<OodOutcome> {
    let train = TrainConfig {
        prior_mode,
        seed: rng::derive(seed, &[purpose::PRIOR]),
        ..train_cfg.clone()
    };
    let train_rows = in_dist.train_rows();
    let encoder = Encoder::fit(
        &train_rows,
        ensemble_cfg.dim,
        ensemble_cfg.bandwidth,
        rng::derive(seed, &[purpose::ENCODER]),
    )?;
    let mut ensemble = Ensemble::new(in_dist.num_classes(), ensemble_cfg.members, encoder, train)?;
    let mut pool = EncodedPool::new(&ensemble, &train_rows)?;
    let labeled: Vec<(usize, usize)> = in_dist.train_labels().into_iter().enumerate().collect();
    ensemble.fit(&mut pool, &labeled, rng::derive(seed, &[purpose::FIT]))?;
    let test_pool = |d: &Dataset| EncodedPool::new(&ensemble, &d.test_rows());
    let in_test = test_pool(in_dist)?;
    let ood_test = test_pool(ood)?;
    Ok(OodOutcome {
        seed,
        prior_mode,
        in_dist_accuracy: accuracy(&ensemble, &in_test, &in_dist.test_labels()),
        histogram: entropy_histogram(&ensemble, &in_test, &ood_test, bins)?,
    })
}
