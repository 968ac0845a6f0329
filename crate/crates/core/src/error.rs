use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("label {label} outside class range 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty batch")]
    EmptyBatch,

    #[error("batch size {batch} exceeds local dataset size {len}")]
    BatchTooLarge { batch: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("IDX format error in {path}: {reason}")]
    IdxFormat { path: PathBuf, reason: String },

    #[error("IDX count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("aggregation weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("aggregation precondition violated: {0}")]
    Precondition(String),

    #[error("worker {0} is excluded and cannot be attested")]
    ExcludedWorker(usize),

    #[error("no participants left at round {0}")]
    NoParticipants(usize),

    #[error("global model became non-finite at round {0}")]
    NonFiniteGlobal(usize),

    #[error("config error for `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("invalid config: {}", .0.iter().map(|(k, r)| format!("`{k}`: {r}")).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<(String, String)>),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("run {run_id}: {source}")]
    Run {
        run_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
