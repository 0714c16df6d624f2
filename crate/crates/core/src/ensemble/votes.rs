use serde::{Deserialize, Serialize};

/// Per-class vote fractions of the ensemble members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteDistribution {
    pub probs: Vec<f64>,
    pub votes: Vec<usize>,
}

impl VoteDistribution {
    pub fn from_votes(votes: Vec<usize>, num_classes: usize) -> Self {
        let mut counts = vec![0usize; num_classes];
        for &v in &votes {
            counts[v] += 1;
        }
        let total = votes.len() as f64;
        let probs = counts.iter().map(|&c| c as f64 / total).collect();
        Self { probs, votes }
    }

    /// Modal class; ties go to the lowest class index.
    pub fn mode(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    pub fn entropy(&self) -> f64 {
        predictive_entropy(&self.probs)
    }
}

/// `−Σ p ln p` over the nonzero entries.
pub fn predictive_entropy(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    // -0.0 for a unanimous vote
    h.max(0.0)
}

/// Index of the largest value, first index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Indices of the largest and second largest values.
pub fn top_two(values: &[f64]) -> (usize, usize) {
    debug_assert!(values.len() >= 2);
    let first = argmax(values);
    let mut second = if first == 0 { 1 } else { 0 };
    for (i, &v) in values.iter().enumerate() {
        if i != first && v > values[second] {
            second = i;
        }
    }
    (first, second)
}
