use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Hypervector;
use crate::error::{Error, Result};
use crate::rng;

/// Lower bound on per-feature standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature z-scoring followed by a global phase bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub bandwidth: f64,
}

impl NormalizationStats {
    /// Population mean and standard deviation over `pool`.
    pub fn fit<V: AsRef<[f64]>>(pool: &[V], bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let first = pool.first().ok_or(Error::EmptyDataset)?.as_ref();
        let n = first.len();
        let mut mean = vec![0.0; n];
        for row in pool {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::InconsistentFeatureCount {
                    expected: n,
                    found: row.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let count = pool.len() as f64;
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; n];
        for row in pool {
            for ((s, v), m) in var.iter_mut().zip(row.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / count).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self {
            mean,
            std,
            bandwidth,
        })
    }

    /// Zero mean, unit std, unit bandwidth: `normalize` is the identity.
    pub fn identity(features: usize) -> Self {
        Self {
            mean: vec![0.0; features],
            std: vec![1.0; features],
            bandwidth: 1.0,
        }
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.features() {
            return Err(Error::InconsistentFeatureCount {
                expected: self.features(),
                found: x.len(),
            });
        }
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                if !v.is_finite() {
                    return Err(Error::NonFiniteFeature { index: k });
                }
                Ok((v - self.mean[k]) / self.std[k] * self.bandwidth)
            })
            .collect()
    }
}

/// The `n × D` phase matrix. Row `k` holds the phases of feature `k`'s
/// positional hypervector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatrix {
    features: usize,
    dim: usize,
    seed: u64,
    theta: Vec<f64>,
}

impl PhaseMatrix {
    pub fn new(features: usize, dim: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, &[rng::purpose::ENCODER]);
        let theta = (0..features * dim).map(|_| r.sample(StandardNormal)).collect();
        Self {
            features,
            dim,
            seed,
            theta,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], seed: u64) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let dim = first.len();
        let mut theta = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            theta.extend_from_slice(row);
        }
        Ok(Self {
            features: rows.len(),
            dim,
            seed,
            theta,
        })
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.theta[k * self.dim..(k + 1) * self.dim]
    }

    pub fn get(&self, k: usize, d: usize) -> f64 {
        self.theta[k * self.dim + d]
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        (0..self.features).map(|k| self.get(k, d)).collect()
    }

    /// Replaces the listed columns with fresh N(0, 1) draws. Columns are
    /// visited in ascending order, each filled top to bottom.
    pub fn regenerate_dimensions<R: Rng + ?Sized>(&mut self, dims: &[usize], rng: &mut R) -> Result<()> {
        let dims = sorted_unique(dims, self.dim)?;
        for d in dims {
            for k in 0..self.features {
                self.theta[k * self.dim + d] = rng.sample(StandardNormal);
            }
        }
        Ok(())
    }

    /// `Θᵀx` for an already normalized input.
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut phases = vec![0.0; self.dim];
        for (k, &v) in x.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (p, t) in phases.iter_mut().zip(self.row(k)) {
                *p += v * t;
            }
        }
        phases
    }
}

pub(crate) fn sorted_unique(dims: &[usize], dim: usize) -> Result<Vec<usize>> {
    let mut out = dims.to_vec();
    out.sort_unstable();
    out.dedup();
    if let Some(&bad) = out.iter().find(|&&d| d >= dim) {
        return Err(Error::DimensionOutOfRange { index: bad, dim });
    }
    Ok(out)
}

/// Fractional power encoder: `h = e^{iΘᵀx̃}` with `x̃` the normalized input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub stats: NormalizationStats,
    pub theta: PhaseMatrix,
    /// Bumped on every regeneration so cached encodings can detect staleness.
    pub version: u64,
}

impl Encoder {
    pub fn new(stats: NormalizationStats, theta: PhaseMatrix) -> Result<Self> {
        if stats.features() != theta.features() {
            return Err(Error::InconsistentFeatureCount {
                expected: theta.features(),
                found: stats.features(),
            });
        }
        Ok(Self {
            stats,
            theta,
            version: 0,
        })
    }

    /// Fits normalization on `pool` and samples a fresh phase matrix.
    pub fn fit<V: AsRef<[f64]>>(pool: &[V], dim: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimensionality must be positive".into()));
        }
        let stats = NormalizationStats::fit(pool, bandwidth)?;
        let theta = PhaseMatrix::new(stats.features(), dim, seed);
        Self::new(stats, theta)
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn features(&self) -> usize {
        self.theta.features()
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.stats.normalize(x)
    }

    pub fn encode(&self, x: &[f64]) -> Result<Hypervector> {
        Ok(self.encode_normalized(&self.normalize(x)?))
    }

    /// Encodes an input that has already been through `normalize`.
    pub fn encode_normalized(&self, x: &[f64]) -> Hypervector {
        debug_assert_eq!(x.len(), self.features());
        Hypervector::from_phases(&self.theta.project(x))
    }

    /// Recomputes only the listed elements of an existing encoding.
    pub fn reencode_dims(&self, x: &[f64], h: &mut Hypervector, dims: &[usize]) {
        for &d in dims {
            let phase: f64 = x
                .iter()
                .enumerate()
                .map(|(k, v)| v * self.theta.get(k, d))
                .sum();
            let (s, c) = phase.sin_cos();
            h.set(d, (c, s));
        }
    }

    pub fn regenerate_dimensions<R: Rng + ?Sized>(&mut self, dims: &[usize], rng: &mut R) -> Result<()> {
        self.theta.regenerate_dimensions(dims, rng)?;
        self.version += 1;
        Ok(())
    }
}
