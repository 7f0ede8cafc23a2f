use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or config field violates its declared domain.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// Two inputs that must share a grid or span do not.
    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    /// A constructed value would break a type invariant.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// The statistic is mathematically undefined for the given input.
    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("fit did not converge after {iterations} iterations (chi2 = {chi2:.6e})")]
    NoConvergence { iterations: usize, chi2: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by user-supplied configuration rather than a
    /// runtime or numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Config(_) | Error::Incompatible(_)
        )
    }
}
