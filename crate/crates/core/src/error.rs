//! Error type shared by every module.

use alloc::string::String;
use alloc::vec::Vec;

/// Failures reported by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,
    #[error("non-finite value in input: {0}")]
    NonFinite(&'static str),
    #[error("non-finite margin at {point:?}")]
    NonFiniteMargin { point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("identification function unavailable for {0}")]
    UnsupportedIdentification(&'static str),
    #[error("no sign change of the margin on [{lo}, {hi}] (margins {margin_lo}, {margin_hi})")]
    Bracket {
        lo: f64,
        hi: f64,
        margin_lo: f64,
        margin_hi: f64,
    },
    #[error("acceptance set is the whole space along the bracket")]
    WholeSpace,
    #[error("clearing did not converge after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("covariance not positive definite")]
    NotPositiveDefinite,
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by the numerics rather than by malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteMargin { .. }
                | Error::Bracket { .. }
                | Error::NoConvergence { .. }
                | Error::NotPositiveDefinite
                | Error::WholeSpace
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

pub(crate) fn check_finite(xs: &[f64], what: &'static str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
