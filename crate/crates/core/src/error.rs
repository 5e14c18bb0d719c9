use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("goal function value must be finite, got {0}")]
    InvalidValue(f64),
    #[error("point coordinates must be finite and non-empty")]
    InvalidPoint,
    #[error("exponent must have finite components, re(nu) >= 0 and nu != 0, got {re}+{im}i")]
    InvalidExponent { re: f64, im: f64 },
    #[error("barycenter of an empty batch")]
    EmptyBatch,
    #[error("total mass cancelled or underflowed")]
    DegenerateMass,
    #[error("forgetting factor must lie in (0, 1], got {0}")]
    InvalidForgetting(f64),
    #[error("accumulators use different exponents")]
    ExponentMismatch,
    #[error("accumulator holds no points")]
    EmptyAccumulator,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("complex exponent requires nonnegative coordinates, got {0} on axis {1}")]
    NegativeCoordinate(f64, usize),
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("unknown oracle {0:?}")]
    NotFound(String),
    #[error("quotient denominator a·v̄ is zero")]
    ZeroDenominator,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("malformed accumulator record: {0}")]
    Decode(String),
}
