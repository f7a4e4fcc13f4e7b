use thiserror::Error;

/// Errors raised by the simulation and certification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid subsystem index {index} for a state with {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("invalid subsystem dimensions: {0}")]
    InvalidDims(String),

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not an involution (|M·M - I| = {0:e})")]
    NotInvolution(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("observables do not anticommute (|A0·A1 + A1·A0| = {0:e})")]
    NotAnticommuting(f64),

    #[error("parameter {name} = {value} is outside its valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("desk-scale limit exceeded: {0}")]
    ScaleExceeded(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    range: &'static str,
    ok: bool,
) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, range })
    }
}
