use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A complex hypervector stored as parallel real and imaginary arrays.
///
/// Encoder outputs are unit phasors; class, prior and memory accumulators
/// share the same representation with unconstrained modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypervector {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Hypervector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            re: vec![0.0; dim],
            im: vec![0.0; dim],
        }
    }

    /// The binding identity.
    pub fn ones(dim: usize) -> Self {
        Self {
            re: vec![1.0; dim],
            im: vec![0.0; dim],
        }
    }

    pub fn from_parts(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::DimensionMismatch {
                left: re.len(),
                right: im.len(),
            });
        }
        Ok(Self { re, im })
    }

    /// Unit phasors `e^{i·phase}`.
    pub fn from_phases(phases: &[f64]) -> Self {
        let (re, im) = phases.iter().map(|p| {
            let (s, c) = p.sin_cos();
            (c, s)
        }).unzip();
        Self { re, im }
    }

    /// Random unit phasors with uniform phase.
    pub fn random_phasor<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let phases: Vec<f64> = (0..dim)
            .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
            .collect();
        Self::from_phases(&phases)
    }

    /// Real and imaginary parts i.i.d. standard normal.
    pub fn random_gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let mut re = Vec::with_capacity(dim);
        let mut im = Vec::with_capacity(dim);
        for _ in 0..dim {
            re.push(rng.sample(StandardNormal));
            im.push(rng.sample(StandardNormal));
        }
        Self { re, im }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.re.len()
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn get(&self, d: usize) -> (f64, f64) {
        (self.re[d], self.im[d])
    }

    pub fn set(&mut self, d: usize, value: (f64, f64)) {
        self.re[d] = value.0;
        self.im[d] = value.1;
    }

    pub fn is_zero(&self) -> bool {
        self.re.iter().chain(&self.im).all(|&v| v == 0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        real_dot(&self.re, &self.im, &self.re, &self.im)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `real(self · other†)`.
    #[inline]
    pub fn dot_re(&self, other: &Hypervector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        real_dot(&self.re, &self.im, &other.re, &other.im)
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.iter().map(|v| -v).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            re: self.re.iter().map(|v| v * factor).collect(),
            im: self.im.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self ← self ⊕ factor·other`.
    #[inline]
    pub fn add_scaled(&mut self, other: &Hypervector, factor: f64) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.re.iter_mut().zip(&other.re) {
            *a += factor * b;
        }
        for (a, b) in self.im.iter_mut().zip(&other.im) {
            *a += factor * b;
        }
    }

    pub fn fill_zero(&mut self) {
        self.re.fill(0.0);
        self.im.fill(0.0);
    }

    /// Raw little-endian bit pattern, used for exact-equality fingerprints.
    pub fn bits(&self) -> impl Iterator<Item = u64> + '_ {
        self.re.iter().chain(&self.im).map(|v| v.to_bits())
    }
}

/// Σ ar·br + ai·bi with four independent accumulators so the loop vectorizes.
#[inline]
fn real_dot(ar: &[f64], ai: &[f64], br: &[f64], bi: &[f64]) -> f64 {
    let n = ar.len();
    let (ar, ai, br, bi) = (&ar[..n], &ai[..n], &br[..n], &bi[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let o = c * 4;
        for k in 0..4 {
            acc[k] += ar[o + k] * br[o + k] + ai[o + k] * bi[o + k];
        }
    }
    let mut tail = 0.0;
    for d in chunks * 4..n {
        tail += ar[d] * br[d] + ai[d] * bi[d];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn check_dims(a: &Hypervector, b: &Hypervector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// Cosine of the complex Euclidean angle, `real(a·b†)/(‖a‖‖b‖)`.
///
/// Returns 0 when either side has zero norm, so freshly zeroed accumulators
/// read as dissimilar to everything.
pub fn similarity(a: &Hypervector, b: &Hypervector) -> f64 {
    assert_eq!(a.dim(), b.dim(), "dimensionality mismatch in similarity");
    let na = a.norm();
    let nb = b.norm();
    similarity_from_parts(a.dot_re(b), na, nb)
}

/// Similarity from a precomputed real dot product and norms.
#[inline]
pub fn similarity_from_parts(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// Elementwise sum. An empty input yields the zero vector of `dim`.
pub fn bundle<'a, I>(vectors: I, dim: usize) -> Result<Hypervector>
where
    I: IntoIterator<Item = &'a Hypervector>,
{
    let mut out = Hypervector::zeros(dim);
    for v in vectors {
        check_dims(&out, v)?;
        out.add_scaled(v, 1.0);
    }
    Ok(out)
}

/// Elementwise complex product.
pub fn bind(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    check_dims(a, b)?;
    let mut re = Vec::with_capacity(a.dim());
    let mut im = Vec::with_capacity(a.dim());
    for d in 0..a.dim() {
        let (ar, ai) = a.get(d);
        let (br, bi) = b.get(d);
        re.push(ar * br - ai * bi);
        im.push(ar * bi + ai * br);
    }
    Ok(Hypervector { re, im })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn hv(parts: &[(f64, f64)]) -> Hypervector {
        let (re, im) = parts.iter().copied().unzip();
        Hypervector::from_parts(re, im).unwrap()
    }

    #[test]
    fn self_and_antipodal_similarity() {
        let mut r = rng::stream(1, &[]);
        let h = Hypervector::random_phasor(512, &mut r);
        assert!((similarity(&h, &h) - 1.0).abs() < 1e-12);
        assert!((similarity(&h, &h.scaled(-1.0)) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_similarity() {
        let a = hv(&[(1.0, 0.0), (0.0, 1.0)]);
        let b = hv(&[(1.0, 0.0), (1.0, 0.0)]);
        assert!((similarity(&a, &b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_norm_similarity_is_zero() {
        let a = hv(&[(1.0, 0.0), (0.0, 1.0)]);
        assert_eq!(similarity(&a, &Hypervector::zeros(2)), 0.0);
        assert_eq!(similarity(&Hypervector::zeros(2), &Hypervector::zeros(2)), 0.0);
    }

    #[test]
    fn bundle_singleton_and_cancellation() {
        let mut r = rng::stream(2, &[]);
        let h = Hypervector::random_phasor(64, &mut r);
        assert_eq!(bundle([&h], 64).unwrap(), h);
        let neg = h.scaled(-1.0);
        assert!(bundle([&h, &neg], 64).unwrap().is_zero());
        assert!(bundle(std::iter::empty(), 8).unwrap().is_zero());
    }

    #[test]
    fn bundle_stays_similar_to_constituents() {
        // Monte-Carlo over 100 seeded trials at D = 2000.
        let dim = 2000;
        let mut to_member = Vec::new();
        let mut to_fresh = Vec::new();
        for trial in 0..100 {
            let mut r = rng::stream(42, &[trial]);
            let a = Hypervector::random_phasor(dim, &mut r);
            let b = Hypervector::random_phasor(dim, &mut r);
            let c = Hypervector::random_phasor(dim, &mut r);
            let s = bundle([&a, &b], dim).unwrap();
            to_member.push(similarity(&s, &a));
            to_fresh.push(similarity(&s, &c));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&to_member) - FRAC_1_SQRT_2).abs() < 0.05);
        assert!(mean(&to_fresh).abs() < 0.05);
        assert!(to_member.iter().all(|s| (s - FRAC_1_SQRT_2).abs() < 0.05));
    }

    #[test]
    fn bind_identity_inverse_and_dissimilarity() {
        let mut r = rng::stream(3, &[]);
        let h = Hypervector::random_phasor(2000, &mut r);
        let g = Hypervector::random_phasor(2000, &mut r);
        assert_eq!(bind(&h, &Hypervector::ones(2000)).unwrap(), h);
        let unit = bind(&h, &h.conj()).unwrap();
        for d in 0..2000 {
            let (re, im) = unit.get(d);
            assert!((re - 1.0).abs() < 1e-12 && im.abs() < 1e-12);
        }
        let bound = bind(&h, &g).unwrap();
        assert!(similarity(&bound, &h).abs() < 0.1);
        assert!(similarity(&bound, &g).abs() < 0.1);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(bind(&Hypervector::zeros(3), &Hypervector::zeros(4)).is_err());
        assert!(bundle([&Hypervector::zeros(4)], 3).is_err());
    }
}
