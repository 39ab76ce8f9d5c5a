//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or malformed input data.
    #[error("input error: {0}")]
    Input(String),
    /// Malformed or inconsistent configuration; the message carries the key path.
    #[error("config error: {0}")]
    Config(String),
    /// A numerical procedure failed (non-convergence, invalid operand).
    #[error("numerical error: {0}")]
    Numeric(String),
    /// Round-plan solver could not satisfy a constraint.
    #[error("solver error: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}
