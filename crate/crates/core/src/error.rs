//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by scheme construction, operators, integrators and studies.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AmfError {
    #[error("iteration count q = {0} is not supported (expected 1, 2 or 3)")]
    InvalidIterationCount(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("diffusion coefficient in direction {direction} must be positive, got {value}")]
    NonPositiveDiffusion { direction: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("direction index {direction} out of range for a {dim}-dimensional operator")]
    InvalidDirection { direction: usize, dim: usize },

    #[error("zero pivot in tridiagonal factor of direction {direction} at row {row}")]
    ZeroPivot { direction: usize, row: usize },

    #[error("stencil in direction {direction} has alpha*beta < 0; spectrum is not real")]
    ComplexSpectrum { direction: usize },

    #[error("dense oracle size guard violated: {0}")]
    SizeGuard(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("t_end = {t_end} is not an integer multiple of tau = {tau}")]
    NonIntegerStepCount { t_end: f64, tau: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, AmfError>;
