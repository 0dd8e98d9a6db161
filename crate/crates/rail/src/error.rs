//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension or length mismatch between tensors, specs, or file payloads.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid configuration value or inconsistent config combination.
    #[error("config error: {0}")]
    Config(String),

    /// Non-finite values where finite ones are required (exploding
    /// gradients, NaN losses, diverged training).
    #[error("divergence: {0}")]
    Divergence(String),

    /// Malformed, truncated, corrupted, or wrong-version file.
    #[error("format error: {0}")]
    Format(String),

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn divergence(msg: impl Into<String>) -> Self {
        Error::Divergence(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
