use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid bit width {0}: must be in 1..=8")]
    InvalidBitWidth(u32),

    #[error("invalid block size {0}: must be at least 1")]
    InvalidBlockSize(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid network spec: {0}")]
    Network(String),

    #[error("tensor format error: {0}")]
    Format(String),

    #[error("unsupported {schema} version {found} (newest readable major is {supported})")]
    UnsupportedVersion {
        schema: String,
        found: String,
        supported: u32,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("candidate pool is empty")]
    EmptyPool,

    #[error("objective error: {0}")]
    Objective(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Network(_)
                | Error::LengthMismatch { .. }
                | Error::InvalidBitWidth(_)
                | Error::InvalidBlockSize(_)
                | Error::Domain(_)
        )
    }
}
