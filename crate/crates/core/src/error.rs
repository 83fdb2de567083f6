use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("invalid intensity {0}: must be finite and non-negative")]
    InvalidIntensity(f64),

    #[error("invalid probability {0}: must lie in [0, 1]")]
    InvalidProbability(f64),

    #[error("intensity {value} at {location:?} exceeds declared bound {bound}")]
    InvalidBound {
        value: f64,
        bound: f64,
        location: Vec<f64>,
    },

    #[error("incompatible ensembles: {0}")]
    IncompatibleEnsembles(String),

    #[error("degenerate transition density (steps = {steps}, s = {s}): motion is a point mass")]
    DegenerateDensity { steps: u64, s: f64 },

    #[error("graph has no components")]
    NoComponent,

    #[error("node {0} not found")]
    NotFound(String),

    #[error("offset norm {norm} exceeds transmission range {range}")]
    InvalidOffset { norm: f64, range: f64 },

    #[error("fit unavailable: {0}")]
    FitUnavailable(String),

    #[error("interval undefined for zero trials")]
    UndefinedInterval,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
