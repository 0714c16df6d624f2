use rayon::prelude::*;

use super::Ensemble;
use crate::error::{Error, Result};
use crate::hdc::{similarity_from_parts, Hypervector};

/// Precomputed query-to-prior similarities for a fixed set of encodings.
///
/// Stores the raw real dot products `real(h · mᵖ†)` alongside the normalized
/// similarities so regeneration can patch individual dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSimilarityCache {
    members: usize,
    classes: usize,
    dots: Vec<f64>,
    sims: Vec<f64>,
    query_norms: Vec<f64>,
}

impl PriorSimilarityCache {
    pub fn build(encodings: &[Hypervector], ensemble: &Ensemble) -> Self {
        let members = ensemble.members();
        let classes = ensemble.num_classes();
        let width = members * classes;
        let rows: Vec<(f64, Vec<f64>)> = encodings
            .par_iter()
            .map(|h| {
                let mut row = Vec::with_capacity(width);
                for sub in ensemble.submodels() {
                    for p in sub.prior() {
                        row.push(h.dot_re(p));
                    }
                }
                (h.norm(), row)
            })
            .collect();
        let mut cache = Self {
            members,
            classes,
            dots: Vec::with_capacity(rows.len() * width),
            sims: Vec::new(),
            query_norms: Vec::with_capacity(rows.len()),
        };
        for (norm, row) in rows {
            cache.query_norms.push(norm);
            cache.dots.extend(row);
        }
        cache.refresh_similarities(ensemble);
        cache
    }

    pub fn len(&self) -> usize {
        self.query_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.query_norms.is_empty()
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    fn offset(&self, sample: usize, member: usize) -> usize {
        (sample * self.members + member) * self.classes
    }

    /// `δ(h_sample, m_classᵖ)` of the given member.
    pub fn similarity(&self, sample: usize, member: usize, class: usize) -> f64 {
        self.sims[self.offset(sample, member) + class]
    }

    pub fn query_norm(&self, sample: usize) -> f64 {
        self.query_norms[sample]
    }

    /// Raw prior dot products of one sample, laid out `[member][class]`.
    pub fn dots(&self, sample: usize) -> &[f64] {
        let w = self.members * self.classes;
        &self.dots[sample * w..(sample + 1) * w]
    }

    pub(crate) fn dots_mut(&mut self, sample: usize) -> &mut [f64] {
        let w = self.members * self.classes;
        &mut self.dots[sample * w..(sample + 1) * w]
    }

    pub(crate) fn set_query_norm(&mut self, sample: usize, norm: f64) {
        self.query_norms[sample] = norm;
    }

    pub(crate) fn refresh_similarities(&mut self, ensemble: &Ensemble) {
        let w = self.members * self.classes;
        let prior_norms: Vec<f64> = ensemble
            .submodels()
            .iter()
            .flat_map(|s| s.prior_norms().iter().copied())
            .collect();
        self.sims = self
            .dots
            .chunks(w.max(1))
            .zip(&self.query_norms)
            .flat_map(|(row, &qn)| {
                row.iter()
                    .zip(&prior_norms)
                    .map(move |(&dot, &pn)| similarity_from_parts(dot, qn, pn))
            })
            .collect();
    }
}

/// A query hypervector with its norm and, when available, cached prior dots.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub h: &'a Hypervector,
    pub norm: f64,
    /// Raw prior dot products `[member][class]`.
    pub prior_dots: Option<&'a [f64]>,
}

impl<'a> Query<'a> {
    /// A query with nothing precomputed.
    pub fn direct(h: &'a Hypervector) -> Self {
        Self {
            h,
            norm: h.norm(),
            prior_dots: None,
        }
    }
}

/// Tracks which encoder and priors a set of encodings was built against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Stamp {
    theta_seed: u64,
    prior_seed: u64,
    version: u64,
}

impl Stamp {
    pub(crate) fn of(ensemble: &Ensemble) -> Self {
        Self {
            theta_seed: ensemble.encoder().theta.seed(),
            prior_seed: ensemble.config().seed,
            version: ensemble.encoder().version,
        }
    }
}

/// Encoded samples plus their prior-similarity cache.
///
/// Samples are encoded once; the cache is kept consistent with the ensemble
/// through regeneration events.
#[derive(Debug, Clone)]
pub struct EncodedPool {
    normalized: Option<Vec<Vec<f64>>>,
    encodings: Vec<Hypervector>,
    cache: PriorSimilarityCache,
    stamp: Stamp,
}

impl EncodedPool {
    /// Normalizes and encodes raw feature rows with the ensemble's encoder.
    pub fn new<V: AsRef<[f64]> + Sync>(ensemble: &Ensemble, rows: &[V]) -> Result<Self> {
        let encoder = ensemble.encoder();
        let normalized: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|r| encoder.normalize(r.as_ref()))
            .collect::<Result<_>>()?;
        let encodings: Vec<Hypervector> = normalized
            .par_iter()
            .map(|x| encoder.encode_normalized(x))
            .collect();
        let cache = PriorSimilarityCache::build(&encodings, ensemble);
        Ok(Self {
            normalized: Some(normalized),
            encodings,
            cache,
            stamp: Stamp::of(ensemble),
        })
    }

    /// Wraps existing encodings. Such a pool cannot follow regeneration.
    pub fn from_encodings(ensemble: &Ensemble, encodings: Vec<Hypervector>) -> Result<Self> {
        if let Some(h) = encodings.iter().find(|h| h.dim() != ensemble.dim()) {
            return Err(Error::DimensionMismatch {
                left: ensemble.dim(),
                right: h.dim(),
            });
        }
        let cache = PriorSimilarityCache::build(&encodings, ensemble);
        Ok(Self {
            normalized: None,
            encodings,
            cache,
            stamp: Stamp::of(ensemble),
        })
    }

    pub fn len(&self) -> usize {
        self.encodings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encodings.is_empty()
    }

    pub fn encoding(&self, i: usize) -> &Hypervector {
        &self.encodings[i]
    }

    pub fn encodings(&self) -> &[Hypervector] {
        &self.encodings
    }

    pub fn cache(&self) -> &PriorSimilarityCache {
        &self.cache
    }

    pub fn query(&self, i: usize) -> Query<'_> {
        Query {
            h: &self.encodings[i],
            norm: self.cache.query_norm(i),
            prior_dots: Some(self.cache.dots(i)),
        }
    }

    pub fn is_current(&self, ensemble: &Ensemble) -> bool {
        self.stamp == Stamp::of(ensemble)
    }

    /// Re-encodes everything if the ensemble's encoder or priors changed
    /// since this pool was built.
    pub fn sync(&mut self, ensemble: &Ensemble) -> Result<()> {
        if self.is_current(ensemble) {
            return Ok(());
        }
        let normalized = self.normalized.as_ref().ok_or_else(|| {
            Error::Config("pool was built from encodings and cannot be re-encoded".into())
        })?;
        let encoder = ensemble.encoder();
        self.encodings = normalized
            .par_iter()
            .map(|x| encoder.encode_normalized(x))
            .collect();
        self.cache = PriorSimilarityCache::build(&self.encodings, ensemble);
        self.stamp = Stamp::of(ensemble);
        Ok(())
    }

    pub(crate) fn normalized(&self) -> Option<&[Vec<f64>]> {
        self.normalized.as_deref()
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (Option<&Vec<Vec<f64>>>, &mut Vec<Hypervector>, &mut PriorSimilarityCache) {
        (self.normalized.as_ref(), &mut self.encodings, &mut self.cache)
    }

    pub(crate) fn restamp(&mut self, ensemble: &Ensemble) {
        self.stamp = Stamp::of(ensemble);
    }
}
