use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spectral grid of size {actual} aliases the requested window (need at least {required})")]
    Aliasing { required: usize, actual: usize },

    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("truncated tail mass {tail:e} exceeds tolerance {tolerance:e}")]
    Truncation { tail: f64, tolerance: f64 },

    #[error("internal consistency failure in {what}: discrepancy {discrepancy:e} > {tolerance:e}")]
    Consistency {
        what: String,
        discrepancy: f64,
        tolerance: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures where two independent computations disagree.
    pub fn is_consistency(&self) -> bool {
        matches!(self, Error::Consistency { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
