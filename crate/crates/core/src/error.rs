//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by state construction, evaluation, and solvers.
#[derive(Debug, Error)]
pub enum SpsError {
    /// Invalid user-supplied configuration (bounds, counts, schedules).
    #[error("configuration error: {0}")]
    Config(String),

    /// Array shapes or site counts do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A site index is outside `0..sites`.
    #[error("site index {index} out of range for {sites} sites")]
    SiteOutOfRange { index: usize, sites: usize },

    /// Two-site operator addressed with twice the same site.
    #[error("site indices must differ (both are {0})")]
    EqualSites(usize),

    /// The state norm is below the numerical-null threshold.
    #[error("state is numerically null (norm {norm:.3e} <= {limit:.1e})")]
    NullState { norm: f64, limit: f64 },

    /// Request exceeds a hard size cap (dense vectors, eigensolves).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A quantity that must be positive came out non-positive beyond round-off.
    #[error("numerical degeneracy: {0}")]
    Degeneracy(String),

    /// Iterative eigensolver failed to reach the requested residual.
    #[error("eigensolver failed to converge: {0}")]
    NoConvergence(String),

    /// NaN or infinity encountered where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

impl SpsError {
    pub fn config(msg: impl Into<String>) -> Self {
        SpsError::Config(msg.into())
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        SpsError::Dimension(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SpsError>;
