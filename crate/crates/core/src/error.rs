//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model evaluation, solving, simulation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter record violates its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An evaluation was requested outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A run configuration is inconsistent (grid, stability, seeds, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// The numerical scheme broke down (negative densities, divergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// No clearing price exists (no crossing volume).
    #[error("no clearing: {0}")]
    NoClearing(String),

    /// Not enough data to run an estimator or fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Every optimizer start failed to converge; traces attached.
    #[error("fit did not converge: {0}")]
    NoConvergence(String),

    /// A text input failed to parse; position is 1-based.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
