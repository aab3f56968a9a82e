use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate density projection: positive part integrates to {0}")]
    DegenerateDensity(f64),
    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
