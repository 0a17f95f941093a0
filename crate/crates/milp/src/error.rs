use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("variable x{var} has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { var: usize, lower: f64, upper: f64 },
    #[error("integer variable x{0} must have finite bounds")]
    UnboundedInteger(usize),
    #[error("warm start does not match the problem: {0}")]
    BadWarmStart(String),
}
