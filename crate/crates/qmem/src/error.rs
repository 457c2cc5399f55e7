use thiserror::Error;

/// Errors produced by the quantum-memory toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix dimension {0} is odd; phase-space matrices must be 2n x 2n")]
    OddDimension(usize),

    #[error("invalid Gaussian state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular matrix in {0}")]
    SingularMatrix(&'static str),

    #[error("degenerate measurement: total variance of the measured quadrature is zero")]
    DegenerateMeasurement,

    #[error("integrator step underflow at t = {time}: {detail}")]
    IntegratorFailure { time: f64, detail: String },
}
