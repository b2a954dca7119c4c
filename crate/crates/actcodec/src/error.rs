//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by codec, kernel and I/O operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure (missing file, short write, ...).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// The bytes are not in the expected format (bad magic, bad field).
    #[error("format error: {0}")]
    Format(String),

    /// The bytes are in the expected format but internally inconsistent
    /// (truncated payload, checksum mismatch, coder desynchronization).
    #[error("corrupt data: {0}")]
    Corrupt(String),

    /// A format/feature the codec knows about but does not handle
    /// (unknown dtype code, unknown coder id, unsupported version).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An input value violates an operation's precondition.
    #[error("invalid input: {0}")]
    Domain(String),

    /// Tensor/layer dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An invalid pipeline or tool configuration.
    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::Corrupt(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
