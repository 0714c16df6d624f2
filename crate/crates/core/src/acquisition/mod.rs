//! Pool bookkeeping and batch acquisition.

mod pool;
mod select;
mod strategy;

pub use pool::{initial_indices, Oracle, PoolState, SimulatedOracle};
pub use select::{replay_admission, select_batch_diverse, select_batch_topk, AcquisitionBatch, AdmissionRecord};
pub use strategy::{score_pool, AcquisitionConfig, Assessment, Strategy};

use serde::{Deserialize, Serialize};

use crate::ensemble::{EncodedPool, Ensemble};
use crate::error::Result;

/// Outcome of one acquisition round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// Round number before the step.
    pub round: usize,
    pub batch: AcquisitionBatch,
    pub labels: Vec<usize>,
    pub labeled_count: usize,
}

/// Scores the unlabeled pool and selects a batch according to `config`.
pub fn propose_batch(
    pool: &PoolState,
    encoded: &EncodedPool,
    ensemble: &Ensemble,
    config: &AcquisitionConfig,
) -> Result<AcquisitionBatch> {
    config.validate()?;
    let assessed = score_pool(pool, encoded, ensemble, config.strategy, config.seed)?;
    Ok(match config.strategy {
        Strategy::HealDiverse => select_batch_diverse(
            &assessed,
            encoded,
            ensemble.num_classes(),
            config.batch_size,
            config.gamma,
        ),
        _ => select_batch_topk(&assessed, config.batch_size),
    })
}

/// Select, label, and move one batch from the pool to the labeled set.
///
/// If the oracle fails the pool is left unchanged.
pub fn acquire_step(
    pool: &mut PoolState,
    encoded: &EncodedPool,
    ensemble: &Ensemble,
    config: &AcquisitionConfig,
    oracle: &mut dyn Oracle,
) -> Result<RoundReport> {
    let round = pool.round();
    let batch = propose_batch(pool, encoded, ensemble, config)?;
    let labels = oracle.label(&batch.indices)?;
    pool.commit(&batch.indices, &labels)?;
    Ok(RoundReport {
        round,
        labeled_count: pool.labeled().len(),
        batch,
        labels,
    })
}
