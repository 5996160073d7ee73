use std::path::PathBuf;

use thiserror::Error;

use crate::polarization::TwoQubitState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined value: {0}")]
    Undefined(String),

    #[error("{what} did not converge (residual {residual:e})")]
    Convergence { what: &'static str, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("maximum-likelihood reconstruction did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    MleNonConvergence {
        best: Box<TwoQubitState>,
        log_likelihood: f64,
        gradient_norm: f64,
        iterations: usize,
    },

    #[error("no finite result: {0}")]
    Unbounded(String),

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    // the underlying errors are part of the message rather than `source()`,
    // so reporters that walk the chain do not print them twice
    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: std::io::Error },

    #[error("csv: {0}")]
    Csv(csv::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. }
                | Error::Singular(_)
                | Error::MleNonConvergence { .. }
                | Error::Undefined(_)
                | Error::Unbounded(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err: source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}
