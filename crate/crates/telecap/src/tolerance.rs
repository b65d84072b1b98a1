//! Numerical tolerances used by validation and the optimisers.
//!
//! All tolerances live in one place so that tests and the command-line
//! front end can state exactly which slack was applied where. Functions
//! that validate numerical objects take a [`Tolerances`] value; there is
//! no hidden global state.

/// Numerical slack applied by validation routines and resource guards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Maximum absolute deviation from Hermitian symmetry, entrywise.
    pub hermiticity: f64,
    /// Eigenvalues of a density matrix may undershoot zero by this much.
    pub psd_slack: f64,
    /// Branch probabilities below this floor are treated as zero; the
    /// branch is flagged degenerate instead of being normalised by noise.
    pub probability_floor: f64,
    /// Maximum absolute deviation of a ket's norm from one.
    pub unit_norm: f64,
    /// Maximum absolute deviation of `U†U` from the identity, entrywise.
    pub unitarity: f64,
    /// Hard cap on the total Hilbert-space dimension of composite systems.
    pub max_total_dim: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermiticity: 1e-10,
            psd_slack: 1e-9,
            probability_floor: 1e-14,
            unit_norm: 1e-10,
            unitarity: 1e-10,
            max_total_dim: 6561,
        }
    }
}

impl Tolerances {
    /// Default tolerances with a different total-dimension cap.
    pub fn with_max_total_dim(max_total_dim: usize) -> Self {
        Tolerances {
            max_total_dim,
            ..Tolerances::default()
        }
    }
}
