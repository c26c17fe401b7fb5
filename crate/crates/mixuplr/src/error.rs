//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two tensors that must agree in shape do not.
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    /// A dimension (input width, class count, ...) does not match.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An operation received an empty tensor or set where data is required.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// NaN or infinity where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A vector that must lie on the probability simplex does not.
    #[error("not a probability vector: {0}")]
    NotAProbability(String),

    /// Domain violation on a scalar or structural argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Lipschitz ratio requested for two (nearly) identical points.
    #[error("coincident points: |x1 - x2| below 1e-12")]
    CoincidentPoints,

    /// Power iteration saw a zero gradient twice for the same row.
    #[error("degenerate gradient: power iteration produced a zero direction twice")]
    DegenerateGradient,

    /// The training loop observed a NaN/Inf loss and aborted.
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    /// Malformed or rejected checkpoint file.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Malformed or rejected experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
