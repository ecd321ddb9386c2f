use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum QError {
    #[error("division by zero")]
    DivisionByZero,
    /// The denominator does not divide the numerator, so the value is not a
    /// Laurent polynomial in q^{1/2}.
    #[error("not a Laurent polynomial in q^(1/2)")]
    NotLaurent,
    #[error("pole at s = 1, classical limit undefined")]
    PoleAtOne,
    /// The two inputs do not agree at q = 1, so they are not the structure
    /// constants of a commuting classical limit.
    #[error("difference does not vanish at q = 1")]
    NonVanishingDifference,
    /// A product factorization asked for a non-integer exponent.
    #[error("factorization requires a non-integral exponent")]
    NonIntegralExponent,
    #[error("chart mismatch: expected chart {expected}, got {got}")]
    ChartMismatch { expected: usize, got: usize },
    #[error("truncation order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("wall function violates its support constraint")]
    MalformedWall,
    #[error("hamiltonian support violates the wall direction")]
    SupportViolation,
    #[error("inconsistent input lengths: {0}")]
    InconsistentLengths(String),
    #[error("non-adjacent chart for crossing ray {0}")]
    NonAdjacentChart(usize),
    #[error("path passes through the origin or a non-generic point; retry with a perturbed endpoint")]
    DegenerateEndpoint,
    #[error("endpoint still degenerate after {0} perturbation retries")]
    RetriesExhausted(usize),
    #[error("generators do not generate the charge basis: {0}")]
    NonGenerating(String),
    #[error("toric model absent")]
    NoToricModel,
    #[error("non-primitive seed vector ({0}, {1})")]
    NonPrimitiveVector(i64, i64),
    #[error("surface/seed mismatch: {0}")]
    SeedMismatch(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type QResult<T> = Result<T, QError>;
