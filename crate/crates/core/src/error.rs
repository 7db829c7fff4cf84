use thiserror::Error;

use crate::metrics::TransportResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported space `{0}`")]
    UnsupportedSpace(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid epsilon {value}: {reason}")]
    InvalidEpsilon { value: f64, reason: &'static str },

    #[error("invalid delta {0}: must lie in (0, 1/2)")]
    InvalidDelta(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point cap must be at least 1")]
    CapZero,

    #[error("word count (2k)^ell = {words:e} exceeds 2^63; pass a cap")]
    OverflowGuard { words: f64 },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("transport instance {n}x{m} exceeds the exact-solver limit {limit}")]
    SizeLimitExceeded { n: usize, m: usize, limit: usize },

    #[error("sinkhorn did not converge after {iterations} iterations (marginal error {marginal_error:e})")]
    NoConvergence {
        iterations: usize,
        marginal_error: f64,
        best: Box<TransportResult>,
    },

    #[error("eigenbasis dimension {total_dim} exceeds the budget {budget}")]
    DimensionBudgetExceeded { total_dim: usize, budget: usize },

    #[error("basis covers eigenvalues up to {available}, need {needed}")]
    BasisTooSmall { needed: f64, available: f64 },

    #[error("budget exceeded: {what} (estimate {estimate}, budget {budget})")]
    BudgetExceeded {
        what: &'static str,
        estimate: usize,
        budget: usize,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
