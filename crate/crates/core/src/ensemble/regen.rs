//! Dimension regeneration: replace the encoder dimensions whose class
//! hypervectors vary least across classes.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::EncodedPool;
use super::config::check_regen_fraction;
use super::Ensemble;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegenEvent {
    /// Regenerated dimensions, ascending.
    pub dims: Vec<usize>,
}

/// Normalized per-dimension variance across classes, averaged over members.
///
/// The variance of a complex entry is Var(real) + Var(imag). Scores sum to 1
/// unless every dimension has zero variance, in which case all are 0.
pub fn dimension_scores(ensemble: &Ensemble) -> Vec<f64> {
    let dim = ensemble.dim();
    let classes = ensemble.num_classes() as f64;
    let mut scores = vec![0.0; dim];
    for sub in ensemble.submodels() {
        let model = sub.model();
        for (d, score) in scores.iter_mut().enumerate() {
            let (mut sr, mut si, mut qr, mut qi) = (0.0, 0.0, 0.0, 0.0);
            for m in model {
                let (r, i) = m.get(d);
                sr += r;
                si += i;
                qr += r * r;
                qi += i * i;
            }
            let mr = sr / classes;
            let mi = si / classes;
            let var = (qr / classes - mr * mr).max(0.0) + (qi / classes - mi * mi).max(0.0);
            *score += var;
        }
    }
    let members = ensemble.members() as f64;
    scores.iter_mut().for_each(|s| *s /= members);
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        scores.iter_mut().for_each(|s| *s /= total);
    }
    scores
}

/// The `count` lowest-scoring dimensions, lowest index first on ties,
/// returned in ascending index order.
pub fn lowest_dimensions(scores: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut dims: Vec<usize> = order.into_iter().take(count).collect();
    dims.sort_unstable();
    dims
}

/// Regenerates `⌊fraction·D⌋` low-variance dimensions.
///
/// The listed phase-matrix columns and prior entries are resampled, model
/// entries at those dimensions are zeroed, and `pool` encodings and cached
/// prior products are patched in place.
pub fn neuralhd_regenerate<R: Rng + ?Sized>(
    ensemble: &mut Ensemble,
    pool: &mut EncodedPool,
    fraction: f64,
    rng: &mut R,
) -> Result<RegenEvent> {
    check_regen_fraction(fraction)?;
    let dim = ensemble.dim();
    let count = ((fraction * dim as f64) + 1e-9).floor() as usize;
    if count == 0 {
        return Ok(RegenEvent { dims: Vec::new() });
    }
    if pool.normalized().is_none() {
        return Err(Error::Config(
            "pool was built from encodings and cannot follow regeneration".into(),
        ));
    }
    if !pool.is_current(ensemble) {
        pool.sync(ensemble)?;
    }
    let dims = lowest_dimensions(&dimension_scores(ensemble), count);

    // Old prior entries at the affected dimensions, [member][class][k].
    let old_prior: Vec<Vec<Vec<(f64, f64)>>> = ensemble
        .submodels()
        .iter()
        .map(|s| s.prior().iter().map(|p| dims.iter().map(|&d| p.get(d)).collect()).collect())
        .collect();

    ensemble.encoder_mut().regenerate_dimensions(&dims, rng)?;
    for sub in ensemble.submodels_mut() {
        for class in 0..sub.model().len() {
            for &d in &dims {
                sub.model_mut()[class].set(d, (0.0, 0.0));
                let fresh = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                sub.prior_mut()[class].set(d, fresh);
            }
            sub.refresh_norms(class);
        }
    }

    let new_prior: Vec<Vec<Vec<(f64, f64)>>> = ensemble
        .submodels()
        .iter()
        .map(|s| s.prior().iter().map(|p| dims.iter().map(|&d| p.get(d)).collect()).collect())
        .collect();

    let encoder = ensemble.encoder().clone();
    let (normalized, encodings, cache) = pool.parts_mut();
    let normalized = normalized.expect("checked above");
    let patches: Vec<(f64, Vec<f64>)> = encodings
        .par_iter_mut()
        .zip(normalized.par_iter())
        .enumerate()
        .map(|(i, (h, x))| {
            let old_h: Vec<(f64, f64)> = dims.iter().map(|&d| h.get(d)).collect();
            encoder.reencode_dims(x, h, &dims);
            let new_h: Vec<(f64, f64)> = dims.iter().map(|&d| h.get(d)).collect();
            let mut dots = cache.dots(i).to_vec();
            let mut k = 0;
            for (old_m, new_m) in old_prior.iter().zip(&new_prior) {
                for (old_c, new_c) in old_m.iter().zip(new_m) {
                    dots[k] += contribution(&new_h, new_c) - contribution(&old_h, old_c);
                    k += 1;
                }
            }
            (h.norm(), dots)
        })
        .collect();
    for (i, (norm, dots)) in patches.into_iter().enumerate() {
        cache.set_query_norm(i, norm);
        cache.dots_mut(i).copy_from_slice(&dots);
    }
    cache.refresh_similarities(ensemble);
    pool.restamp(ensemble);
    Ok(RegenEvent { dims })
}

fn contribution(h: &[(f64, f64)], p: &[(f64, f64)]) -> f64 {
    h.iter().zip(p).map(|(a, b)| a.0 * b.0 + a.1 * b.1).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{PriorMode, TrainConfig};
    use crate::hdc::{similarity, Encoder, Hypervector, NormalizationStats, PhaseMatrix};
    use crate::rng;

    fn small_ensemble(dim: usize, classes: usize, members: usize) -> Ensemble {
        let enc = Encoder::new(NormalizationStats::identity(2), PhaseMatrix::new(2, dim, 1)).unwrap();
        Ensemble::new(classes, members, enc, TrainConfig::default()).unwrap()
    }

    #[test]
    fn hand_computed_variances() {
        let mut e = small_ensemble(3, 2, 1);
        let rows = [[1.0, 0.0, 2.0], [1.0, 4.0, 2.0]];
        for (c, row) in rows.iter().enumerate() {
            let h = Hypervector::from_parts(row.to_vec(), vec![0.0; 3]).unwrap();
            e.submodels_mut()[0].model_mut()[c] = h;
        }
        // Raw variances [0, 4, 0], normalized by their sum.
        let scores = dimension_scores(&e);
        assert_eq!(scores, vec![0.0, 1.0, 0.0]);
        assert_eq!(lowest_dimensions(&scores, 2), vec![0, 2]);
    }

    #[test]
    fn zero_fraction_is_noop() {
        let mut e = small_ensemble(32, 3, 2);
        let before = e.clone();
        let mut pool = EncodedPool::new(&e, &[vec![0.1, 0.2]]).unwrap();
        let event = neuralhd_regenerate(&mut e, &mut pool, 0.0, &mut rng::stream(0, &[])).unwrap();
        assert!(event.dims.is_empty());
        assert_eq!(e, before);
    }

    #[test]
    fn fraction_out_of_range() {
        let mut e = small_ensemble(32, 3, 2);
        let mut pool = EncodedPool::new(&e, &[vec![0.1, 0.2]]).unwrap();
        assert!(neuralhd_regenerate(&mut e, &mut pool, 1.0, &mut rng::stream(0, &[])).is_err());
        assert!(neuralhd_regenerate(&mut e, &mut pool, -0.1, &mut rng::stream(0, &[])).is_err());
    }

    #[test]
    fn cache_matches_direct_computation_after_regeneration() {
        let mut e = small_ensemble(256, 4, 3);
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, 1.0 - i as f64 * 0.05]).collect();
        let mut pool = EncodedPool::new(&e, &rows).unwrap();
        let labeled: Vec<(usize, usize)> = (0..20).map(|i| (i, i % 4)).collect();
        e.fit(&mut pool, &labeled, 3).unwrap();
        let event = neuralhd_regenerate(&mut e, &mut pool, 0.25, &mut rng::stream(5, &[])).unwrap();
        assert_eq!(event.dims.len(), 64);
        for (i, row) in rows.iter().enumerate() {
            let fresh = e.encoder().encode(row).unwrap();
            assert!((similarity(&fresh, pool.encoding(i)) - 1.0).abs() < 1e-12);
            for m in 0..3 {
                for c in 0..4 {
                    let direct = similarity(&fresh, &e.submodels()[m].prior()[c]);
                    assert!((pool.cache().similarity(i, m, c) - direct).abs() < 1e-9);
                }
            }
        }
        for sub in e.submodels() {
            for m in sub.model() {
                for &d in &event.dims {
                    assert_eq!(m.get(d), (0.0, 0.0));
                }
            }
        }
        assert!(pool.is_current(&e));
    }

    #[test]
    fn regeneration_runs_inside_fit() {
        let enc = Encoder::new(NormalizationStats::identity(2), PhaseMatrix::new(2, 128, 1)).unwrap();
        let cfg = TrainConfig {
            regen: Some(crate::ensemble::RegenConfig {
                every_epochs: 1,
                fraction: 0.1,
            }),
            max_epochs: 4,
            target_train_accuracy: 1.0,
            prior_mode: PriorMode::Isolated,
            ..TrainConfig::default()
        };
        let mut e = Ensemble::new(3, 2, enc, cfg).unwrap();
        // Overlapping inputs with conflicting labels never reach 100%.
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 5) as f64 * 0.01, 0.0]).collect();
        let mut pool = EncodedPool::new(&e, &rows).unwrap();
        let labeled: Vec<(usize, usize)> = (0..30).map(|i| (i, i % 3)).collect();
        let report = e.fit(&mut pool, &labeled, 9).unwrap();
        assert_eq!(report.regen_events.len(), 3);
        assert_eq!(e.encoder().version, 3);
        assert!(pool.is_current(&e));
    }
}
