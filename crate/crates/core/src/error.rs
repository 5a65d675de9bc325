use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),

    /// A single input row or record failed validation. `line` is 1-based.
    #[error("{source_name}, record {line}: {message}")]
    Record {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("schema version mismatch: expected {expected}, found {found}")]
    Schema { expected: String, found: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("missing {what} for id {id:?}")]
    Missing { what: &'static str, id: String },

    #[error("offset {offset} out of range for sample {id:?} of length {len}")]
    OffsetOutOfRange { id: String, offset: usize, len: usize },

    #[error("invalid sample {id:?}: {message}")]
    InvalidSample { id: String, message: String },

    #[error("non-toxic pool too small: {0}")]
    PoolTooSmall(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn record(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Record {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}
