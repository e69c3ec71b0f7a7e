use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed problem: {0}")]
    Malformed(String),

    #[error("need at least two states, got {0}")]
    TooFewStates(usize),

    #[error("state {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("state {index} has norm {norm}, expected 1")]
    NotNormalized { index: usize, norm: f64 },

    #[error("expected {expected} priors, got {found}")]
    PriorCount { expected: usize, found: usize },

    #[error("prior {index} is negative or not finite: {value}")]
    InvalidPrior { index: usize, value: f64 },

    #[error("priors sum ≠ 1 (sum = {0})")]
    PriorSum(f64),

    #[error("beta set has zero prior")]
    ZeroBetaPrior,

    #[error("degenerate prior: filtering trivial (η₁ = {0})")]
    DegeneratePrior(f64),

    #[error("positivity matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("outcome probabilities for input {input} sum to {sum}")]
    CorruptPovm { input: usize, sum: f64 },

    #[error("inconsistent solution: {0}")]
    Inconsistent(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
