//! Error type shared by the whole crate.

use thiserror::Error;

/// Everything that can go wrong when building states, evaluating
/// capabilities, or reading and writing state files.
#[derive(Debug, Error)]
pub enum TelecapError {
    /// Two operands disagree about the dimension they should share.
    #[error("dimension mismatch: {context} (expected {expected}, got {actual})")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    /// A matrix that must be a density matrix failed validation.
    #[error("not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),

    /// A matrix that must be unitary failed validation.
    #[error("not a valid unitary: {0}")]
    InvalidUnitary(String),

    /// A vector that must be a normalised ket failed validation.
    #[error("not a valid ket: {0}")]
    InvalidKet(String),

    /// A party label does not exist in the layout, or labels collide.
    #[error("invalid label: {0}")]
    InvalidLabel(String),

    /// A parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested total Hilbert-space dimension exceeds the configured cap.
    #[error("total dimension {requested} exceeds the configured maximum {max}")]
    DimensionTooLarge { requested: usize, max: usize },

    /// A numerical routine failed to reach its target (kept as data, not a
    /// panic, so callers can decide whether a non-converged answer is usable).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Reading or writing a file failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A state file or report could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl TelecapError {
    /// Shorthand for [`TelecapError::DimensionMismatch`].
    pub fn dim_mismatch(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        TelecapError::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }
}
