use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum MfgError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density must be positive: min m = {min:e} at point {index}")]
    NonPositiveDensity { min: f64, index: usize },

    #[error("optimal speed solve did not converge for |p| = {p_mag:e} (a = {a}, gamma' = {gamma_prime})")]
    SpeedSolve { p_mag: f64, a: f64, gamma_prime: f64 },

    #[error("singular system matrix: {0}")]
    Singular(String),

    #[error("malformed field file: {0}")]
    FieldFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MfgError>;
