use thiserror::Error;

/// Errors produced anywhere in the core pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty trace")]
    EmptyTrace,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: timestamp {value} is smaller than the previous timestamp {prev}")]
    Ordering { line: usize, value: u64, prev: u64 },

    #[error("row {row}: {msg}")]
    Format { row: usize, msg: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Param(msg.into())
}
