use thiserror::Error;

/// Errors raised anywhere in the testing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient sample size: {0}")]
    InsufficientSamples(String),

    #[error("Hotelling T^2 is undefined in high dimension: {0}")]
    SingularCovariance(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("coordinate {index} has zero variance")]
    ZeroVariance { index: usize },

    #[error("calibration mismatch: {0}")]
    CalibrationMismatch(String),

    #[error("invalid calibration file: {0}")]
    InvalidCalibration(String),

    #[error("invalid input data: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
