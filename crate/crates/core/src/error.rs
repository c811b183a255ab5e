use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text (XML, model text, CSV cells).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Well-formed input that violates the expected structure.
    #[error("schema error: {0}")]
    Schema(String),

    /// An operation was called outside of its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("conflicting values for feature {feature}: {left} vs {right}")]
    Conflict {
        feature: String,
        left: f64,
        right: f64,
    },

    #[error("checkpoint integrity error: {0}")]
    Integrity(String),

    #[error("configuration mismatch with snapshot:\n{0}")]
    ConfigMismatch(String),

    #[error("missing inputs: {0}")]
    MissingInputs(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }
}
