use alloc::boxed::Box;

/// Errors raised by the engines. Every failure that happens mid-integration
/// carries the step index or external time at which it occurred.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("states are not consecutive: expected index {expected}, found {found}")]
    NonConsecutive { expected: u64, found: u64 },

    #[error("non-finite value produced at step {step}")]
    NonFinite { step: u64 },

    #[error("non-finite value produced at t = {t}")]
    NonFiniteAt { t: f64 },

    #[error("constraint drift |C - 1| = {drift:e} exceeds {tolerance:e} at t = {t}")]
    ConstraintViolation { t: f64, drift: f64, tolerance: f64 },

    #[error("t = {t} lies outside the covered span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error("observable matrix is not Hermitian")]
    NonHermitian,

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("convergence study needs at least 3 resolutions, got {0}")]
    TooFewResolutions(usize),

    #[error("resolutions must halve successively (index {0})")]
    NotHalving(usize),

    #[error("error does not decrease under refinement (index {0})")]
    NonMonotoneError(usize),

    #[error("ensemble member {index} failed: {source}")]
    Member { index: usize, source: Box<Error> },
}

pub type Result<T> = core::result::Result<T, Error>;
