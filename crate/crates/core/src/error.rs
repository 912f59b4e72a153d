use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("AR polynomial is not stable: companion spectral radius {radius} >= {threshold}")]
    UnstableAr { radius: f64, threshold: f64 },

    #[error("coefficient list is empty")]
    EmptyCoefficients,

    #[error("noise standard deviation must be positive, got {0}")]
    NonpositiveNoise(f64),

    #[error("non-finite input {0}")]
    NonFiniteInput(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("state diverged at t={step}: |x| = {magnitude:e}")]
    NonFiniteState { step: usize, magnitude: f64 },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("trajectories have unequal lengths ({expected} vs {found})")]
    RaggedEnsemble { expected: usize, found: usize },

    #[error("bin edges must be finite and strictly ascending")]
    BadEdges,

    #[error("functional `{name}` reached |f| = {observed} above its declared bound {bound}")]
    UnboundedFunctional {
        name: String,
        observed: f64,
        bound: f64,
    },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub(crate) fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFiniteInput(x))
    }
}
