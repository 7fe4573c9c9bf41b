//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction, solvers, and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor received a parameter outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An operation received structurally invalid input (wrong shape, bad weights, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Mismatched dimensions between two objects that must agree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The kernel family has no convolution square root.
    #[error("kernel family {0} has no convolution square root")]
    NotFactorizable(&'static str),

    /// A trajectory left the trusted numerical range.
    #[error("numerical blowup at t = {time:.6}: particle {index} has magnitude {magnitude:.3e}")]
    NumericalBlowup {
        index: usize,
        time: f64,
        magnitude: f64,
    },

    /// An explicit step violated its stability bound; retry with the suggested step.
    #[error("time step rejected: stability requires dt <= {max_dt:.6e}")]
    StepRejected { max_dt: f64 },

    /// Adaptive stepping drove dt below the trusted floor.
    #[error("time step underflow: dt = {dt:.3e} fell below {floor:.3e}")]
    DtUnderflow { dt: f64, floor: f64 },

    /// Picard iteration failed to contract on the requested horizon.
    #[error("fixed-point horizon too long: no contraction observed; retry with t0 <= {suggested:.6e}")]
    NonContractive { suggested: f64 },

    /// The truncated domain no longer contains the solution mass.
    #[error("domain truncation invalid: boundary density {boundary:.3e} exceeds {limit:.3e}")]
    Truncation { boundary: f64, limit: f64 },

    /// Configuration file or override could not be interpreted.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure while writing run outputs.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
