use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AlignError>;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("empty phoneme sequence")]
    EmptySequence,

    #[error("unknown phoneme `{0}`")]
    UnknownPhoneme(String),

    #[error("phoneme id {id} outside vocabulary of size {size}")]
    PhonemeIdOutOfRange { id: usize, size: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no feasible path: {frames} frames cannot cover {states} states")]
    NoFeasiblePath { frames: usize, states: usize },

    #[error("zero-probability lattice")]
    ZeroProbabilityLattice,

    #[error("oracle too large: T={frames}, K={states} (limit T<=12, K<=6)")]
    OracleTooLarge { frames: usize, states: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no boundaries to score")]
    NoBoundaries,

    #[error("phoneme sequence mismatch: {0}")]
    SequenceMismatch(String),

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AlignError {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        AlignError::DimensionMismatch(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        AlignError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AlignError::Io {
            path: path.into(),
            source,
        }
    }
}
