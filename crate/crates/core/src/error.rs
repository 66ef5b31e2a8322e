use std::fmt;

use thiserror::Error;

/// Errors raised by the library. Bound violations are never errors; they are
/// reported as data in [`crate::bounds::BoundReport`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl fmt::Display) -> Self {
        Error::Validation(msg.to_string())
    }

    pub(crate) fn resource(msg: impl fmt::Display) -> Self {
        Error::Resource(msg.to_string())
    }

    pub(crate) fn config(msg: impl fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }

    /// Process exit code used by the command-line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation(_) | Error::Io(_) => 1,
            Error::Resource(_) => 2,
            Error::Invariant(_) => 3,
        }
    }
}
