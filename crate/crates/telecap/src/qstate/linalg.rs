//! Small-matrix numerical linear algebra: a cyclic Jacobi eigensolver for
//! Hermitian matrices, a Cholesky-based positive-semidefiniteness bound, the
//! polar decomposition used by the manifold optimizer, and a square SVD.
//!
//! Everything here targets the modest sizes this crate actually touches
//! (local dimensions up to a few, composite blocks up to a few hundred), so
//! robustness and determinism are prioritized over asymptotic tricks.

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::TelecapError;
use crate::Result;

/// Eigendecomposition of a Hermitian matrix.
///
/// `values` are ascending; `vectors` holds the corresponding orthonormal
/// eigenvectors as columns, so `A = V · diag(values) · V†`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
///
/// The input is symmetrized first (`(A + A†)/2`), so callers may pass a
/// matrix that is Hermitian only up to rounding. Deterministic: the sweep
/// order and rotation choices depend only on the input entries.
pub fn eigh(a: &ComplexMatrix) -> Result<HermitianEigen> {
    let n = a.rows();
    if n != a.cols() {
        return Err(TelecapError::dim_mismatch("eigh input", n, a.cols()));
    }
    if n == 0 {
        return Err(TelecapError::InvalidParameter("eigh of empty matrix".into()));
    }
    // Work on the Hermitian part; off-Hermitian noise from callers is below
    // their own tolerance budgets.
    let mut m = ComplexMatrix::from_fn(n, n, |r, c| {
        (a.get(r, c) + a.get(c, r).conj()) * Complex64::new(0.5, 0.0)
    });
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let target = 1e-15 * scale;

    let max_sweeps = 100;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for r in 0..n {
            for c in (r + 1)..n {
                off += m.get(r, c).norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let abs_apq = apq.norm();
                if abs_apq <= 1e-300 {
                    continue;
                }
                // Phase factor turning the (p,q) entry real positive, then a
                // real Jacobi rotation annihilating it.
                let f = apq.conj() / abs_apq;
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let tau = (aqq - app) / (2.0 * abs_apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cth = 1.0 / (1.0 + t * t).sqrt();
                let sth = t * cth;
                // Combined unitary G restricted to the (p,q) plane:
                //   G[p][p] = c        G[p][q] = s
                //   G[q][p] = −s·f     G[q][q] = c·f
                let gpp = Complex64::new(cth, 0.0);
                let gpq = Complex64::new(sth, 0.0);
                let gqp = -Complex64::new(sth, 0.0) * f;
                let gqq = Complex64::new(cth, 0.0) * f;

                // m ← G† m G, applied as column then row updates.
                for r in 0..n {
                    let mp = m.get(r, p);
                    let mq = m.get(r, q);
                    m.set(r, p, mp * gpp + mq * gqp);
                    m.set(r, q, mp * gpq + mq * gqq);
                }
                for c2 in 0..n {
                    let mp = m.get(p, c2);
                    let mq = m.get(q, c2);
                    m.set(p, c2, gpp.conj() * mp + gqp.conj() * mq);
                    m.set(q, c2, gpq.conj() * mp + gqq.conj() * mq);
                }
                for r in 0..n {
                    let vp = v.get(r, p);
                    let vq = v.get(r, q);
                    v.set(r, p, vp * gpp + vq * gqp);
                    v.set(r, q, vp * gpq + vq * gqq);
                }
            }
        }
    }

    // Sort ascending, stably, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap().then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok(HermitianEigen { values, vectors })
}

/// Column `k` of an eigenvector matrix as an owned vector.
pub fn eigen_column(vectors: &ComplexMatrix, k: usize) -> Vec<Complex64> {
    (0..vectors.rows()).map(|r| vectors.get(r, k)).collect()
}

/// Certify `min eigenvalue ≥ −slack` for a Hermitian matrix via Cholesky.
///
/// Attempts a Cholesky factorization of `A + shift·I` where `shift` is the
/// requested slack plus a rounding allowance proportional to the dimension;
/// success proves the bound. This is O(n³) but avoids a full
/// eigendecomposition for validation of large states.
pub fn min_eigenvalue_at_least(a: &ComplexMatrix, slack: f64) -> bool {
    let n = a.rows();
    if n != a.cols() {
        return false;
    }
    let max_diag = (0..n).map(|i| a.get(i, i).re.abs()).fold(0.0, f64::max);
    let shift = slack + f64::EPSILON * (n as f64) * max_diag.max(1.0);
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut pivot = a.get(j, j).re + shift;
        for k in 0..j {
            pivot -= l[j * n + k].norm_sqr();
        }
        if pivot <= 0.0 {
            return false;
        }
        let ljj = pivot.sqrt();
        l[j * n + j] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut acc = a.get(i, j);
            for k in 0..j {
                acc -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = acc / ljj;
        }
    }
    true
}

/// Unitary polar factor of a square matrix: the `U` in `M = U·H` with `H`
/// positive semidefinite. Computed from the eigendecomposition of `M†M`,
/// with a Gram–Schmidt fallback when `M` is nearly singular.
pub fn polar_unitary_factor(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.rows();
    if n != m.cols() {
        return Err(TelecapError::dim_mismatch("polar factor input", n, m.cols()));
    }
    let gram = m.adjoint().mul(m);
    let eig = eigh(&gram)?;
    let lambda_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = (1e-28 * lambda_max).max(1e-290);
    // inv_sqrt = V diag(λ^{-1/2}) V†, clamping tiny eigenvalues.
    let v = &eig.vectors;
    let mut scaled = v.clone();
    for c in 0..n {
        let lam = eig.values[c].max(cutoff);
        let s = Complex64::new(1.0 / lam.sqrt(), 0.0);
        for r in 0..n {
            scaled.set(r, c, scaled.get(r, c) * s);
        }
    }
    let inv_sqrt = scaled.mul(&v.adjoint());
    let mut u = m.mul(&inv_sqrt);
    if u.unitarity_error() > 1e-12 {
        orthonormalize_columns(&mut u);
    }
    Ok(u)
}

/// Modified Gram–Schmidt on the columns, replacing numerically dependent
/// columns with completed standard-basis directions.
pub fn orthonormalize_columns(m: &mut ComplexMatrix) {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let mut cols: Vec<Vec<Complex64>> = (0..n)
        .map(|c| (0..n).map(|r| m.get(r, c)).collect())
        .collect();
    for c in 0..n {
        for prev in 0..c {
            let proj: Complex64 = cols[prev]
                .iter()
                .zip(&cols[c])
                .map(|(p, x)| p.conj() * x)
                .sum();
            for r in 0..n {
                let correction = proj * cols[prev][r];
                cols[c][r] -= correction;
            }
        }
        let mut norm = cols[c].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            // Column collapsed: take the standard basis vector least
            // represented so far and re-orthogonalize it.
            let mut best_e = 0;
            let mut best_res = -1.0;
            for e in 0..n {
                let mut resid = 1.0;
                for prev_col in cols.iter().take(c) {
                    resid -= prev_col[e].norm_sqr();
                }
                if resid > best_res {
                    best_res = resid;
                    best_e = e;
                }
            }
            for (r, entry) in cols[c].iter_mut().enumerate() {
                *entry = Complex64::new(if r == best_e { 1.0 } else { 0.0 }, 0.0);
            }
            for prev in 0..c {
                let proj: Complex64 = cols[prev]
                    .iter()
                    .zip(&cols[c])
                    .map(|(p, x)| p.conj() * x)
                    .sum();
                for r in 0..n {
                    let correction = proj * cols[prev][r];
                    cols[c][r] -= correction;
                }
            }
            norm = cols[c].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        }
        let inv = Complex64::new(1.0 / norm, 0.0);
        for r in 0..n {
            cols[c][r] *= inv;
        }
        for r in 0..n {
            m.set(r, c, cols[c][r]);
        }
    }
}

/// Singular value decomposition of a square matrix: `M = U · diag(σ) · V†`
/// with `σ` descending and `U`, `V` unitary.
pub fn svd_square(m: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    let n = m.rows();
    if n != m.cols() {
        return Err(TelecapError::dim_mismatch("svd input", n, m.cols()));
    }
    let eig = eigh(&m.adjoint().mul(m))?;
    // eigh returns ascending order; singular values descend.
    let mut sigma = Vec::with_capacity(n);
    let mut v = ComplexMatrix::zeros(n, n);
    for c in 0..n {
        let src = n - 1 - c;
        sigma.push(eig.values[src].max(0.0).sqrt());
        for r in 0..n {
            v.set(r, c, eig.vectors.get(r, src));
        }
    }
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let cutoff = (1e-14 * sigma_max).max(1e-290);
    let mv = m.mul(&v);
    let mut u = ComplexMatrix::zeros(n, n);
    for c in 0..n {
        if sigma[c] > cutoff {
            let inv = Complex64::new(1.0 / sigma[c], 0.0);
            for r in 0..n {
                u.set(r, c, mv.get(r, c) * inv);
            }
        }
        // Collapsed columns stay zero; orthonormalization completes them.
    }
    orthonormalize_columns(&mut u);
    Ok((u, sigma, v))
}

/// `exp(i·H)` for Hermitian `H`, a unitary. Closed form for 2×2, spectral
/// decomposition otherwise.
pub fn expi_hermitian(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = h.rows();
    if n != h.cols() {
        return Err(TelecapError::dim_mismatch("expi input", n, h.cols()));
    }
    if n == 2 {
        // H = α·I + m⃗·σ⃗ with |m⃗| = r gives e^{iH} = e^{iα}(cos r · I + i sin r · m̂⃗·σ⃗).
        let a = h.get(0, 0).re;
        let d = h.get(1, 1).re;
        let b = (h.get(0, 1) + h.get(1, 0).conj()) * Complex64::new(0.5, 0.0);
        let alpha = 0.5 * (a + d);
        let mx = b.re;
        let my = -b.im;
        let mz = 0.5 * (a - d);
        let r = (mx * mx + my * my + mz * mz).sqrt();
        let phase = Complex64::from_polar(1.0, alpha);
        let (cr, sr_over_r) = if r > 1e-300 {
            (r.cos(), r.sin() / r)
        } else {
            (1.0, 1.0)
        };
        let i = Complex64::new(0.0, 1.0);
        let m00 = Complex64::new(cr, 0.0) + i * Complex64::new(sr_over_r * mz, 0.0);
        let m11 = Complex64::new(cr, 0.0) - i * Complex64::new(sr_over_r * mz, 0.0);
        let m01 = i * Complex64::new(sr_over_r, 0.0) * Complex64::new(mx, -my);
        let m10 = i * Complex64::new(sr_over_r, 0.0) * Complex64::new(mx, my);
        return Ok(ComplexMatrix::from_data(
            2,
            2,
            vec![phase * m00, phase * m01, phase * m10, phase * m11],
        )?);
    }
    let eig = eigh(h)?;
    let v = &eig.vectors;
    let mut scaled = v.clone();
    for c in 0..n {
        let p = Complex64::from_polar(1.0, eig.values[c]);
        for r in 0..n {
            scaled.set(r, c, scaled.get(r, c) * p);
        }
    }
    Ok(scaled.mul(&v.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        // Tiny deterministic LCG; test-local, no external RNG needed.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let raw = ComplexMatrix::from_fn(n, n, |_, _| c(next(), next()));
        raw.add(&raw.adjoint()).scale(c(0.5, 0.0))
    }

    #[test]
    fn eigh_diagonalizes_known_2x2() {
        // [[2, 1],[1, 2]] has eigenvalues 1 and 3.
        let m = ComplexMatrix::from_data(2, 2, vec![c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)])
            .unwrap();
        let e = eigh(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_handles_complex_offdiagonal() {
        // [[1, i],[-i, 1]] has eigenvalues 0 and 2.
        let m = ComplexMatrix::from_data(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)])
            .unwrap();
        let e = eigh(&m).unwrap();
        assert!((e.values[0] - 0.0).abs() < 1e-12);
        assert!((e.values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_reconstructs_random_matrices() {
        for seed in 1..6u64 {
            let n = 2 + (seed as usize % 4) * 2; // 2,4,6,8,4
            let m = random_hermitian(n, seed);
            let e = eigh(&m).unwrap();
            assert!(e.vectors.unitarity_error() < 1e-12, "eigenvectors not orthonormal");
            let mut recon = ComplexMatrix::zeros(n, n);
            for k in 0..n {
                let col = eigen_column(&e.vectors, k);
                for r in 0..n {
                    for cc in 0..n {
                        let add = col[r] * col[cc].conj() * c(e.values[k], 0.0);
                        recon.set(r, cc, recon.get(r, cc) + add);
                    }
                }
            }
            assert!(m.max_abs_diff(&recon) < 1e-12, "A != VΛV†");
            for k in 1..n {
                assert!(e.values[k] >= e.values[k - 1] - 1e-14, "values not ascending");
            }
        }
    }

    #[test]
    fn cholesky_bound_accepts_psd_and_rejects_indefinite() {
        let m = random_hermitian(5, 7);
        let gram = m.adjoint().mul(&m); // PSD by construction
        assert!(min_eigenvalue_at_least(&gram, 1e-9));
        // Shift spectrum down by more than the slack.
        let shifted = gram.add(&ComplexMatrix::identity(5).scale(c(-1e-3, 0.0)));
        let e = eigh(&shifted).unwrap();
        if e.values[0] < -1e-6 {
            assert!(!min_eigenvalue_at_least(&shifted, 1e-9));
        }
    }

    #[test]
    fn polar_factor_is_unitary_and_exact_for_scaled_unitary() {
        let m = random_hermitian(4, 3);
        let u0 = expi_hermitian(&m).unwrap();
        let scaled = u0.scale(c(2.5, 0.0));
        let u = polar_unitary_factor(&scaled).unwrap();
        assert!(u.unitarity_error() < 1e-10);
        assert!(u.max_abs_diff(&u0) < 1e-10);
    }

    #[test]
    fn svd_reconstructs_and_orders_descending() {
        for seed in 1..5u64 {
            let n = 3;
            let m = random_hermitian(n, seed * 13).mul(&random_hermitian(n, seed * 29 + 1));
            let (u, s, v) = svd_square(&m).unwrap();
            assert!(u.unitarity_error() < 1e-10);
            assert!(v.unitarity_error() < 1e-10);
            for k in 1..n {
                assert!(s[k] <= s[k - 1] + 1e-12);
            }
            let mut sigma = ComplexMatrix::zeros(n, n);
            for k in 0..n {
                sigma.set(k, k, c(s[k], 0.0));
            }
            let recon = u.mul(&sigma).mul(&v.adjoint());
            assert!(m.max_abs_diff(&recon) < 1e-10);
        }
    }

    #[test]
    fn expi_matches_spectral_route_for_2x2() {
        let h = ComplexMatrix::from_data(
            2,
            2,
            vec![c(0.3, 0.0), c(0.2, -0.7), c(0.2, 0.7), c(-1.1, 0.0)],
        )
        .unwrap();
        let closed = expi_hermitian(&h).unwrap();
        // Spectral route.
        let e = eigh(&h).unwrap();
        let v = &e.vectors;
        let mut scaled = v.clone();
        for col in 0..2 {
            let p = Complex64::from_polar(1.0, e.values[col]);
            for r in 0..2 {
                scaled.set(r, col, scaled.get(r, col) * p);
            }
        }
        let spectral = scaled.mul(&v.adjoint());
        assert!(closed.max_abs_diff(&spectral) < 1e-12);
        assert!(closed.unitarity_error() < 1e-12);
    }
}
