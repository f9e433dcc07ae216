use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid signature record: {0}")]
    InvalidRecord(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sequence too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("insufficient signatures for user {user}: {detail}")]
    InsufficientSignatures { user: String, detail: String },

    #[error("missing features for signature {0}")]
    MissingFeatures(String),

    #[error("degenerate score set: {0}")]
    Degenerate(String),

    #[error("training diverged at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
