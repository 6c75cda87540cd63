use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate labels: both classes must be present")]
    DegenerateLabels,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("sequence error: {0}")]
    Sequence(String),
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidValue(format!("{what}[{i}] = {}", values[i]))),
        None => Ok(()),
    }
}
