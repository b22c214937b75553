use std::io;

use thiserror::Error;

/// Errors produced by the npiscan library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown label name: {0:?}")]
    UnknownLabel(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("pattern {index} of {entity} failed to compile: {message}")]
    Pattern {
        entity: String,
        index: usize,
        message: String,
    },

    #[error("scan failed on pattern {index} of {entity}: {message}")]
    Scan {
        entity: String,
        index: usize,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("embedding file line {line}: {message}")]
    Embedding { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
