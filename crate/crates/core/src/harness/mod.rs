//! Datasets, benchmark runs and the metrics reported from them.

mod config;
mod dataset;
mod export;
mod metrics;
mod runner;

pub use config::{AcquisitionSection, DatasetSpec, RunConfig};
pub use dataset::{
    class_means, duplicate_pool, euclidean, load_csv_dataset, load_csv_split, ood_fixture_spec, synth_blobs, synth_ood_generator,
    synth_ood_pair, BlobSpec,
    Dataset, OOD_MIN_SEPARATION,
};
pub use export::{curve_file_name, import_results, read_curve, state_file_name, timing_file_name, write_curve, write_timing};
pub use metrics::{
    entropy_histogram, ood_entropy_experiment, pairwise_matrix, ComparisonMatrix, EntropyConfig, EntropyHistogram,
    OodOutcome, PENALTY_RULE,
};
pub use runner::{
    run_learning_curve, LearningCurve, Manifest, RunEntry, RunOptions, RunOutcome, RunStatus, MANIFEST_FILE, PAIRWISE_FILE,
};
