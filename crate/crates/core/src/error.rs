//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical kernel and the model layers.
#[derive(Debug, Error)]
pub enum LabError {
    /// Invalid argument or configuration value.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A banded or dense solve hit a zero / near-zero pivot.
    #[error("singular pivot at row {row} (|pivot| = {magnitude:.3e})")]
    SingularPivot { row: usize, magnitude: f64 },

    /// Adaptive step-size control drove the step below the representable floor.
    #[error("ODE step-size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    /// Newton iteration did not meet the tolerance within the iteration cap.
    #[error("Newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonNonConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    /// Two profiles or fields live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A non-finite value appeared during a PDE evolution.
    #[error("non-finite field value at s = {s}")]
    NonFinite { s: f64 },

    /// A PDE history slab does not cover the requested evaluation window.
    #[error("history slab too short: need [{need_lo}, {need_hi}], have [{have_lo}, {have_hi}]")]
    SlabTooShort {
        need_lo: f64,
        need_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },

    /// Data too degenerate for the requested fit or regression.
    #[error("degenerate regression: {0}")]
    DegenerateFit(String),

    /// I/O error while reading or writing artifact files.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file contents.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidInput(msg.into())
    }
}
