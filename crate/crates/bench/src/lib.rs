//! Fixtures shared by the benchmarks.

use hdal_core::ensemble::{EncodedPool, Ensemble, TrainConfig};
use hdal_core::harness::{synth_blobs, BlobSpec, Dataset};
use hdal_core::{Encoder, PoolState};

/// A trained ensemble over a blob pool of `pool_size` samples, with the
/// first tenth labeled.
pub struct Fixture {
    pub dataset: Dataset,
    pub ensemble: Ensemble,
    pub encoded: EncodedPool,
    pub pool: PoolState,
}

pub fn blob_rows(pool_size: usize, features: usize) -> Dataset {
    let classes = 10;
    synth_blobs(&BlobSpec {
        classes,
        features,
        train_per_class: pool_size.div_ceil(classes),
        test_per_class: 0,
        seed: 7,
        ..BlobSpec::default()
    })
}

pub fn fixture(pool_size: usize, dim: usize, members: usize) -> Fixture {
    let dataset = blob_rows(pool_size, 32);
    let rows = dataset.train_rows();
    let encoder = Encoder::fit(&rows, dim, 0.18, 1).expect("encoder fits");
    let mut ensemble = Ensemble::new(dataset.num_classes(), members, encoder, TrainConfig::default()).expect("valid ensemble");
    let mut encoded = EncodedPool::new(&ensemble, &rows).expect("pool encodes");
    let labels = dataset.train_labels();
    let labeled: Vec<(usize, usize)> = (0..rows.len()).step_by(10).map(|i| (i, labels[i])).collect();
    ensemble.fit(&mut encoded, &labeled, 2).expect("training succeeds");
    let mut pool = PoolState::new(rows.len());
    let (indices, labels): (Vec<usize>, Vec<usize>) = labeled.into_iter().unzip();
    pool.commit(&indices, &labels).expect("fresh pool accepts labels");
    Fixture {
        dataset,
        ensemble,
        encoded,
        pool,
    }
}
