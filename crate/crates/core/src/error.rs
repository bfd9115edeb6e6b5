use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the torus laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid or solver configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical argument outside the admissible set (exponents, triples, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Fields living on different grids or with incompatible component counts.
    #[error("shape error: {0}")]
    Shape(String),

    /// A dyadic block or split level that the grid cannot resolve.
    #[error("range error: {0}")]
    Range(String),

    /// An operation precondition that the input data violates.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The time stepper aborted (CFL violation or non-finite state).
    #[error("numerical abort at t = {time}: {reason}")]
    NumericalAbort { time: f64, reason: String },

    #[error("malformed snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
