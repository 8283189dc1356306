use thiserror::Error;

/// Errors raised by constructors and operations across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("empty distribution")]
    Empty,

    #[error("entry {index} is negative ({value:e})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("entry {index} is not finite")]
    NonFinite { index: usize },

    #[error("entries sum to {sum}, expected {expected}")]
    BadNormalization { sum: f64, expected: f64 },

    #[error("column {column} sums to {sum}, expected {expected}")]
    BadColumn {
        column: usize,
        sum: f64,
        expected: &'static str,
    },

    #[error("input states are linearly dependent (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("dynamics not describable by a stochastic map: {reason}")]
    NotStochastic { reason: String },

    #[error("system marginal vanishes at index {index}; conditional undefined")]
    ZeroMarginal { index: usize },

    #[error("power iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no accepted runs for basis preparation ({j}, {k})")]
    ZeroAcceptance { j: usize, k: usize },

    #[error("invalid value for `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
