//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by model construction, analytic evaluation, and the
/// Monte Carlo oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A function argument lies outside its supported domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model definition violates one of its invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A moment E[Θ^l] was requested beyond the highest finite moment of the
    /// mixing distribution.
    #[error("moment of order {requested} is not finite (highest finite order: {ceiling})")]
    MomentNotFinite { requested: u32, ceiling: u32 },

    /// A survival probability underflowed so far into the tail that hazards
    /// and conditional moments are no longer representable.
    #[error("tail survival underflow at threshold {threshold}")]
    TailUnderflow { threshold: f64 },

    /// The aggregate variance w'Σw is not strictly positive.
    #[error("degenerate aggregate: w'\u{03a3}w = {sigma2} is not positive")]
    DegenerateAggregate { sigma2: f64 },

    /// The total tail central moment is not positive, so the rooted total
    /// K = TCM^{1/k} is undefined.
    #[error("tail central moment {value} is not positive; rooted allocation undefined")]
    NonPositiveTcm { value: f64 },

    /// The covariance matrix admits no square-root factor within tolerance.
    #[error("covariance factorisation failed: {0}")]
    FactorisationFailure(String),

    /// No Monte Carlo draw exceeded the tail threshold.
    #[error("empty tail: no draws exceeded the threshold")]
    EmptyTail,

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    /// A root-finding bracket could not be established or refined.
    #[error("root finding failure: {0}")]
    RootFindingFailure(String),

    /// A data series is too short for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A price series contains a non-positive price.
    #[error("non-positive price for {label} at row {row}: {value}")]
    NonPositivePrice { label: String, row: usize, value: f64 },

    /// An input file failed to parse.
    #[error("parse error: {0}")]
    Parse(String),

    /// An I/O operation failed.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
