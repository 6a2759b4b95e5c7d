//! Error types shared across the crate.

use thiserror::Error;

/// Unified error type for the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a precondition (bad shape, out-of-range label, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A wire message could not be decoded.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// An SDL handle lacked the capability for the requested operation.
    #[error("permission denied: {0}")]
    PermissionDenied(String),

    /// A database key (or required entry) does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// I/O failure, annotated with the path involved.
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The operation is not meaningful in the current mode.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
