use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine, the problem instantiations and the harness.
#[derive(Debug, Error)]
pub enum GmmError {
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite objective {value} at iteration {t}")]
    NonFiniteObjective { t: usize, value: f64 },

    #[error("selector returned an invalid bound at iteration {t}: b(w_prev) = {value}, threshold = {threshold}")]
    InvalidBound { t: usize, value: f64, threshold: f64 },

    #[error("bound solver did not converge: duality gap {gap:e} > tolerance {tolerance:e} after {epochs} epochs")]
    SolverNotConverged { gap: f64, tolerance: f64, epochs: usize },

    #[error("mean placement infeasible: gave up after {attempts} attempts with {placed} of {wanted} means placed")]
    InfeasibleMixture {
        attempts: usize,
        placed: usize,
        wanted: usize,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("dataset fingerprints differ: {0} vs {1}")]
    FingerprintMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GmmError {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        GmmError::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user-supplied configuration rather than a
    /// failure during execution.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            GmmError::InvalidConfig { .. }
                | GmmError::InvalidArgument(_)
                | GmmError::Parse { .. }
                | GmmError::FingerprintMismatch(..)
        )
    }
}

pub type Result<T, E = GmmError> = std::result::Result<T, E>;
