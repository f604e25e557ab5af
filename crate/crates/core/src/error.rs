//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or input data; maps to CLI exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// A caller broke an API contract (driver bug, never user input).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Trace file could not be read or parsed.
    #[error("trace error: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn trace(msg: impl Into<String>) -> Self {
        Error::Trace(msg.into())
    }

    /// True for errors that should map to the validation exit code.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
