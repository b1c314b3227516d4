use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("no dataset image matches condition {0}")]
    NoMatchingCondition(String),

    #[error("reference prediction is all zeros; projection is undefined")]
    DegenerateReference,

    #[error("step {t} outside valid range {lo}..={hi}")]
    StepOutOfRange { t: usize, lo: usize, hi: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed image at byte {offset}: {reason}")]
    MalformedImage {
        path: PathBuf,
        offset: usize,
        reason: String,
    },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("{path}: {reason}")]
    Metrics { path: PathBuf, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
