//! Haar-distributed random states and unitaries.
//!
//! Randomized routines across the crate take an explicit RNG so that every
//! result is reproducible from a seed; parallel call sites derive
//! independent ChaCha streams instead of sharing one generator.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{vec_norm_sqr, ComplexMatrix};
use super::{DensityMatrix, SystemLayout, Ket, Unitary};
use crate::error::TelecapError;
use crate::Result;

/// Complex standard Gaussian sample.
fn gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Haar-random amplitude vector of the given dimension (normalized complex
/// Gaussian vector).
pub(crate) fn haar_amplitudes(dim: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = vec_norm_sqr(&v).sqrt();
        if norm > 1e-12 {
            let inv = Complex64::new(1.0 / norm, 0.0);
            return v.into_iter().map(|z| z * inv).collect();
        }
    }
}

/// Haar-distributed pure state of a single `d`-dimensional system.
pub fn haar_random_ket(d: usize, rng: &mut impl Rng) -> Result<Ket> {
    if d < 2 {
        return Err(TelecapError::InvalidParameter(format!(
            "haar_random_ket needs d ≥ 2 (got {d})"
        )));
    }
    let layout = SystemLayout::new(vec!["A1".into()], vec![d])?;
    let amplitudes = haar_amplitudes(d, rng);
    // Normalization above is exact to rounding; skip re-validation.
    Ok(Ket::new(layout, amplitudes)?)
}

/// Haar-distributed `d × d` unitary: orthonormalize a complex Gaussian
/// matrix by Gram–Schmidt, then fix the phases of the triangular factor's
/// diagonal so the distribution is exactly Haar.
pub fn haar_random_unitary(d: usize, rng: &mut impl Rng) -> Result<Unitary> {
    if d < 2 {
        return Err(TelecapError::InvalidParameter(format!(
            "haar_random_unitary needs d ≥ 2 (got {d})"
        )));
    }
    // Modified Gram–Schmidt QR on a Ginibre matrix. The normalizers are the
    // triangular factor's diagonal; dividing by them (real, positive) is the
    // phase fix that makes the orthonormal factor exactly Haar.
    let g = ComplexMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let mut cols: Vec<Vec<Complex64>> = (0..d)
        .map(|c| (0..d).map(|r| g.get(r, c)).collect())
        .collect();
    let mut q = ComplexMatrix::zeros(d, d);
    for c in 0..d {
        for prev in 0..c {
            let proj: Complex64 = (0..d).map(|r| q.get(r, prev).conj() * cols[c][r]).sum();
            for r in 0..d {
                let correction = proj * q.get(r, prev);
                cols[c][r] -= correction;
            }
        }
        // A Ginibre matrix is singular with probability zero; rounding keeps
        // the residual norms comfortably positive in practice.
        let norm = vec_norm_sqr(&cols[c]).sqrt();
        let inv = Complex64::new(1.0 / norm, 0.0);
        for r in 0..d {
            q.set(r, c, cols[c][r] * inv);
        }
    }
    Ok(Unitary::new(q)?)
}

/// Ginibre-induced random mixed state of the given rank: `ρ = GG†/tr(GG†)`
/// for a complex Gaussian `dim × rank` matrix `G`. Rank `dim` gives the
/// standard Hilbert–Schmidt-induced ensemble with full support.
pub fn random_density_matrix(
    layout: SystemLayout,
    rank: usize,
    rng: &mut impl Rng,
) -> Result<DensityMatrix> {
    let dim = layout.total_dim();
    if rank < 1 || rank > dim {
        return Err(TelecapError::InvalidParameter(format!(
            "random_density_matrix rank must lie in 1..={dim} (got {rank})"
        )));
    }
    let mut m = ComplexMatrix::zeros(dim, dim);
    for _ in 0..rank {
        let g: Vec<Complex64> = (0..dim).map(|_| gaussian(rng)).collect();
        for r in 0..dim {
            let gr = g[r];
            for c in 0..dim {
                m.set(r, c, m.get(r, c) + gr * g[c].conj());
            }
        }
    }
    let tr = m.trace().re;
    let m = m.scale(Complex64::new(1.0 / tr, 0.0));
    DensityMatrix::new(layout, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kets_are_reproducible_and_normalized() {
        let mut rng1 = ChaCha8Rng::seed_from_u64(42);
        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        let a = haar_random_ket(2, &mut rng1).unwrap();
        let b = haar_random_ket(2, &mut rng2).unwrap();
        assert_eq!(a.amplitudes(), b.amplitudes());
        assert!((vec_norm_sqr(a.amplitudes()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unitaries_are_reproducible_and_unitary() {
        let mut rng1 = ChaCha8Rng::seed_from_u64(7);
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let a = haar_random_unitary(3, &mut rng1).unwrap();
        let b = haar_random_unitary(3, &mut rng2).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) == 0.0);
        assert!(a.matrix().unitarity_error() < 1e-10);
    }

    #[test]
    fn first_moment_matches_haar_for_kets() {
        // mean |⟨0|ξ⟩|² = 1/d; 3σ bounds from var = (d−1)/(d²(d+1)).
        for d in [2usize, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(123);
            let samples = 10_000;
            let mut acc = 0.0;
            for _ in 0..samples {
                let k = haar_random_ket(d, &mut rng).unwrap();
                acc += k.amplitudes()[0].norm_sqr();
            }
            let mean = acc / samples as f64;
            let var = (d as f64 - 1.0) / ((d * d) as f64 * (d as f64 + 1.0));
            let three_sigma = 3.0 * (var / samples as f64).sqrt();
            assert!(
                (mean - 1.0 / d as f64).abs() < three_sigma,
                "d={d}: mean {mean} outside 3σ = {three_sigma}"
            );
        }
    }

    #[test]
    fn first_moment_matches_haar_for_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = 10_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let u = haar_random_unitary(2, &mut rng).unwrap();
            acc += u.matrix().get(0, 0).norm_sqr();
        }
        let mean = acc / samples as f64;
        // |U_00|² of a Haar column behaves like |⟨0|ξ⟩|² with d = 2.
        let var = 1.0 / 12.0;
        let three_sigma = 3.0 * (var / samples as f64).sqrt();
        assert!((mean - 0.5).abs() < three_sigma);
    }
}
