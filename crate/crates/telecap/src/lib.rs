//! Teleportation capability of multi-qudit states under local control.
//!
//! This crate answers a concrete operational question: given an `N`-party
//! state of qudits (dimension `d` each), how well can two chosen parties
//! teleport an unknown qudit between them when every *other* party assists
//! only by measuring its own qudit in some single-particle basis and
//! broadcasting the outcome?
//!
//! The quantitative answer is built from three layers:
//!
//! * [`fef`] — the fully entangled fraction `f(ρ)` of a two-qudit state and
//!   the teleportation fidelity `F = (d·f + 1)/(d + 1)` it certifies. For
//!   two qubits the maximisation over maximally entangled states is solved
//!   exactly; for higher `d` a Riemannian ascent over local unitaries is
//!   provided along with a brute-force sampling oracle.
//! * [`ctel`] — the controlled variant: the assisting parties' measurement
//!   bases are optimised so that the *outcome-averaged* fully entangled
//!   fraction of the pair left behind is as large as possible.
//! * [`thresholds`] — exact rational bounds on that capability for states
//!   that are `k`-separable or contain only limited-size entangled clusters,
//!   together with the partition combinatorics behind them.
//!
//! [`factory`] builds the named states used throughout (generalised GHZ
//! kets, digit-sum kets, extremal partially separable mixtures, noisy GHZ
//! mixtures, random separable ensembles), [`qstate`] supplies the dense
//! linear-algebra substrate (kets, density matrices, partial trace, product
//! measurements, Haar sampling, state-file I/O), and [`oracle`] contains
//! slow, independent cross-checks used to validate the fast paths.
//!
//! Everything is deterministic: randomised routines take explicit seeds and
//! optimisers break ties by the lowest restart index.

pub mod ctel;
pub mod error;
pub mod factory;
pub mod fef;
pub mod oracle;
pub mod qstate;
pub mod thresholds;
pub mod tolerance;

#[cfg(doctest)]
mod book;

pub use error::TelecapError;
pub use tolerance::Tolerances;

/// Convenience result alias used across the crate.
pub type Result<T> = std::result::Result<T, TelecapError>;
