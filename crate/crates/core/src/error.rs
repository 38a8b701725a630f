use std::path::PathBuf;

use thiserror::Error;

use crate::noarb::FeasibilityVerdict;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid stopping spec: {0}")]
    InvalidStopping(String),

    #[error("invalid payoff: {0}")]
    InvalidPayoff(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unflagged mass leakage {leak:.3e} at time slice {slice}")]
    MassLeakage { slice: usize, leak: f64 },

    /// The lower information time already spreads mass beyond the target law,
    /// so no calibrated model exists for the insider.
    #[error("infeasible instance: {}", .verdict.describe())]
    Infeasible { verdict: Box<FeasibilityVerdict> },

    #[error(
        "projected SOR did not converge at step {step} after {iterations} sweeps (last change {change:.3e})"
    )]
    PsorNotConverged {
        step: usize,
        iterations: usize,
        change: f64,
    },

    #[error("horizon too short: {0}")]
    HorizonTooShort(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
