use thiserror::Error;

use crate::trace::RunTrace;

pub type Result<T, E = OptError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OptError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite {what} at point {point:?}")]
    NonFinite { what: &'static str, point: Vec<f64> },

    #[error("point {point:?} lies outside the domain where the stated constants hold: {reason}")]
    OutOfDomain { point: Vec<f64>, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing known constant {0}; theoretical schedules need it")]
    MissingConstant(&'static str),

    #[error("certificate contradiction: no witness pair found although certification failed (inconsistent oracle or wrong constants)")]
    CertificateContradiction,

    #[error("{what} exceeded {limit} iterations")]
    MaxIterations {
        what: &'static str,
        limit: usize,
        trace: Box<RunTrace>,
    },

    #[error("{what}: step size search failed after {attempts} attempts")]
    StepSearchFailed { what: &'static str, attempts: usize },

    #[error("point {point:?} not found among the recorded iterates")]
    PointNotFound { point: Vec<f64> },

    /// Failure raised by a user-supplied objective.
    #[error("objective error: {0}")]
    External(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for OptError {
    fn from(e: serde_json::Error) -> Self {
        OptError::Serde(e.to_string())
    }
}

impl From<csv::Error> for OptError {
    fn from(e: csv::Error) -> Self {
        OptError::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for OptError {
    fn from(e: toml::de::Error) -> Self {
        OptError::Serde(e.to_string())
    }
}
