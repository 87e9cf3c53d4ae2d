use thiserror::Error;

/// Errors produced by the pipeline library.
#[derive(Debug, Error)]
pub enum Error {
    /// A malformed input record, reported with its 1-based line number.
    #[error("record error at line {line}: {reason}")]
    Record { line: usize, reason: String },

    /// Invalid parameter or configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data violates a precondition of an operation.
    #[error("invalid data: {0}")]
    Data(String),

    /// A persisted container carries a format version this build cannot read.
    #[error("unsupported container version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    /// A persisted container is truncated or structurally corrupt.
    #[error("corrupt container: {0}")]
    Corrupt(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
