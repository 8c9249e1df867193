use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the registration pipeline.
#[derive(Debug, Error)]
pub enum RegError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("eigensolver did not converge: {converged} of {requested} modes after {iterations} iterations")]
    EigenSolver {
        requested: usize,
        converged: usize,
        iterations: usize,
    },
}

pub type Result<T> = std::result::Result<T, RegError>;

pub(crate) fn invalid(msg: impl Into<String>) -> RegError {
    RegError::InvalidInput(msg.into())
}
