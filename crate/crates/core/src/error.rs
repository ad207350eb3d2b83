use thiserror::Error;

use crate::descent::TrajectoryEntry;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} is empty")]
    Empty { what: &'static str },

    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: String },

    #[error("unsupported pair: {kernel} kernel with {target} target; {hint}")]
    Unsupported {
        kernel: String,
        target: String,
        hint: &'static str,
    },

    #[error("non-finite update for particle {particle}")]
    NonFiniteUpdate { particle: usize },

    #[error("diverged at iteration {iteration}: mmd {mmd:e} exceeds 1000x initial {initial:e}")]
    Diverged {
        iteration: usize,
        mmd: f64,
        initial: f64,
        trajectory: Vec<TrajectoryEntry>,
    },

    #[error("cannot parse {what}: {reason}")]
    Parse { what: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
