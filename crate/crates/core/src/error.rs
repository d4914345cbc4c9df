use thiserror::Error;

/// Errors raised by operators, solvers and problem construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector must have at least one entry")]
    EmptyVector,

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("operator {operator} lacks capability `{capability}`")]
    MissingCapability {
        operator: &'static str,
        capability: &'static str,
    },

    #[error("quadratic form is not positive ({value:e}); operator is not positive definite")]
    NotPositive { value: f64 },

    #[error("operator is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("inner solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    InnerSolve { iterations: usize, residual: f64 },

    #[error("spectral estimation did not converge: {0}")]
    Estimation(String),

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("iteration breakdown: updated iterand vanished (norm ratio {ratio:e})")]
    Breakdown { ratio: f64 },

    #[error("perturbation exceeds budget: {observed:e} > {allowed:e}")]
    PerturbationBudget { observed: f64, allowed: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("Rayleigh quotient {mu} is outside the analyzed bracket [{lower}, {upper})")]
    OutsideBracket { mu: f64, lower: f64, upper: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("epsilon halving exceeded {0} iterations")]
    MaxHalvings(usize),

    #[error("outer iteration cap of {0} steps reached without convergence")]
    MaxSteps(usize),

    #[error("starting vector rejected: {0}")]
    BadStart(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
