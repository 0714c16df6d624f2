use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("inconsistent feature count: expected {expected}, found {found}")]
    InconsistentFeatureCount { expected: usize, found: usize },

    #[error("non-finite feature at position {index}")]
    NonFiniteFeature { index: usize },

    #[error("dimension index out of range: {index} (dimensionality {dim})")]
    DimensionOutOfRange { index: usize, dim: usize },

    #[error("dimensionality mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("sample index {0} is not in the unlabeled pool")]
    NotInPool(usize),

    #[error("oracle failed for sample {index}: {reason}")]
    Oracle { index: usize, reason: String },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("mismatched checkpoints: {0}")]
    MismatchedCheckpoints(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
