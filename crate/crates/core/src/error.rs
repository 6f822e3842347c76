use thiserror::Error;

/// Errors shared by all simulation modules.
#[derive(Debug, Error)]
pub enum CoreError {
    /// An input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix or vector has the wrong dimension.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: String,
    },

    /// A covariance matrix is not positive semidefinite within tolerance.
    #[error("covariance not positive semidefinite: {0}")]
    Covariance(String),

    /// A state blew up during integration.
    #[error("trajectory diverged at t = {time} (trajectory index {trajectory:?})")]
    Divergence { time: f64, trajectory: Option<usize> },

    /// A step size is too large for the requested evolution.
    #[error("step-size error: {0}")]
    StepSize(String),

    /// A formula was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
}
