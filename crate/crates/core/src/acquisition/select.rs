use serde::{Deserialize, Serialize};

use super::Assessment;
use crate::ensemble::EncodedPool;
use crate::hdc::{similarity_from_parts, Hypervector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub index: usize,
    pub pseudo_label: usize,
    /// Similarity to the class memory at the moment of the check.
    pub similarity: f64,
    pub admitted: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AcquisitionBatch {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub pseudo_labels: Vec<usize>,
    /// Candidates the diversity filter rejected.
    pub skipped: Vec<usize>,
    /// Skipped candidates added back because the walk ran out of pool.
    pub filled: Vec<usize>,
    /// Every diversity check in walk order.
    pub trace: Vec<AdmissionRecord>,
}

impl AcquisitionBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn push(&mut self, a: &Assessment) {
        self.indices.push(a.index);
        self.scores.push(a.score);
        self.pseudo_labels.push(a.pseudo_label);
    }
}

/// Descending score, ascending index on ties.
fn ranked(assessed: &[Assessment]) -> Vec<&Assessment> {
    let mut order: Vec<&Assessment> = assessed.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    order
}

/// The `k` highest-scoring samples.
pub fn select_batch_topk(assessed: &[Assessment], k: usize) -> AcquisitionBatch {
    let mut batch = AcquisitionBatch::default();
    for a in ranked(assessed).into_iter().take(k) {
        batch.push(a);
    }
    batch
}

struct Memory {
    vectors: Vec<Hypervector>,
    norms: Vec<f64>,
}

impl Memory {
    fn new(classes: usize, dim: usize) -> Self {
        Self {
            vectors: vec![Hypervector::zeros(dim); classes],
            norms: vec![0.0; classes],
        }
    }

    fn similarity(&self, class: usize, h: &Hypervector, h_norm: f64) -> f64 {
        if self.norms[class] == 0.0 {
            return 0.0;
        }
        similarity_from_parts(h.dot_re(&self.vectors[class]), h_norm, self.norms[class])
    }

    fn memorize(&mut self, class: usize, h: &Hypervector) {
        self.vectors[class].add_scaled(h, 1.0);
        self.norms[class] = self.vectors[class].norm();
    }
}

/// Walks the ranked pool, admitting a candidate only when its similarity to
/// the memory of its pseudo-label is at most `gamma`, then bundling it into
/// that memory. If fewer than `k` are admitted, skipped candidates fill the
/// remainder in rank order.
pub fn select_batch_diverse(
    assessed: &[Assessment],
    encoded: &EncodedPool,
    classes: usize,
    k: usize,
    gamma: f64,
) -> AcquisitionBatch {
    let dim = encoded.encodings().first().map_or(0, Hypervector::dim);
    let mut memory = Memory::new(classes, dim);
    let mut batch = AcquisitionBatch::default();
    let mut skipped = Vec::new();
    for a in ranked(assessed) {
        if batch.len() >= k {
            break;
        }
        let h = encoded.encoding(a.index);
        let sim = memory.similarity(a.pseudo_label, h, encoded.cache().query_norm(a.index));
        let admitted = sim <= gamma;
        batch.trace.push(AdmissionRecord {
            index: a.index,
            pseudo_label: a.pseudo_label,
            similarity: sim,
            admitted,
        });
        if admitted {
            batch.push(a);
            memory.memorize(a.pseudo_label, h);
        } else {
            batch.skipped.push(a.index);
            skipped.push(a);
        }
    }
    for a in skipped {
        if batch.len() >= k {
            break;
        }
        batch.push(a);
        batch.filled.push(a.index);
    }
    batch
}

/// Re-runs the diversity checks of a batch from scratch and confirms that
/// every recorded similarity and decision reproduces exactly and that each
/// admitted sample satisfied `similarity <= gamma`.
pub fn replay_admission(batch: &AcquisitionBatch, encoded: &EncodedPool, classes: usize, gamma: f64) -> bool {
    let dim = encoded.encodings().first().map_or(0, Hypervector::dim);
    let mut memory = Memory::new(classes, dim);
    let mut admitted = Vec::new();
    for rec in &batch.trace {
        let h = encoded.encoding(rec.index);
        let sim = memory.similarity(rec.pseudo_label, h, encoded.cache().query_norm(rec.index));
        if sim.to_bits() != rec.similarity.to_bits() || (sim <= gamma) != rec.admitted {
            return false;
        }
        if rec.admitted {
            memory.memorize(rec.pseudo_label, h);
            admitted.push(rec.index);
        }
    }
    let walked: Vec<usize> = batch
        .indices
        .iter()
        .copied()
        .filter(|i| !batch.filled.contains(i))
        .collect();
    walked == admitted
}
