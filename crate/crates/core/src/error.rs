//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced while constructing or validating problem data,
/// schedules, and bound evaluations.
#[derive(Debug, Error)]
pub enum TvqpError {
    /// Inconsistent dimensions or invalid parameter values.
    #[error("configuration error: {0}")]
    Config(String),

    /// A mathematical precondition does not hold (e.g. non-PD matrix).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The ground-truth solver failed to produce a usable answer.
    #[error("oracle failure: {0}")]
    Oracle(String),

    /// A step-size feasibility region was empty; names the violated term.
    #[error("step size infeasible: {0}")]
    StepSize(String),

    /// I/O or parse failures at the CLI boundary.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Config file syntax or content errors.
    #[error("config parse error ({path}:{line}): {msg}")]
    ConfigParse {
        path: String,
        line: usize,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, TvqpError>;
