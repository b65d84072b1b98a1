//! Fully entangled fraction of two-qudit states.
//!
//! The fully entangled fraction of a two-qudit density matrix is the maximal
//! overlap with any maximally entangled pure state,
//!
//! ```text
//! f(ρ) = max ⟨e|ρ|e⟩  over  |e⟩ = (I ⊗ U)|Φ⁺⟩,  U ∈ U(d),
//! ```
//!
//! with `|Φ⁺⟩ = (1/√d) Σ_i |ii⟩`. It determines the best teleportation
//! fidelity achievable over the state: `F = (d·f + 1)/(d + 1)`.
//!
//! Three solvers are provided:
//! - [`fef_exact_qubit`]: exact for two qubits via the magic-basis reduction
//!   (a real symmetric 4×4 eigenproblem);
//! - [`fef_general`]: multi-restart Riemannian ascent over `U(d)` for any
//!   `d`, reporting a certified lower bound;
//! - [`fef_pure`]: closed form for pure inputs via Schmidt coefficients.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::TelecapError;
use crate::qstate::linalg::{eigh, polar_unitary_factor, svd_square};
use crate::qstate::{ComplexMatrix, DensityMatrix, Ket, Unitary};
use crate::Result;

/// How a [`FefResult`] was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FefMethod {
    /// Exact two-qubit solution via the magic-basis eigenproblem.
    MagicBasisExact,
    /// Multi-restart ascent on the unitary manifold (lower-bound certificate).
    ManifoldOptimizer,
    /// Random search baseline (lower-bound certificate).
    RandomSearchOracle,
    /// Closed form for pure states via Schmidt coefficients.
    SchmidtPure,
}

/// Result of a fully-entangled-fraction computation.
#[derive(Clone, Debug)]
pub struct FefResult {
    /// The computed fraction; exact methods report the true value, iterative
    /// ones a certified lower bound.
    pub value: f64,
    /// Unitary `U` whose `|e⟩ = (I ⊗ U)|Φ⁺⟩` attains `value`.
    pub maximizer: Unitary,
    pub method: FefMethod,
    /// Number of distinct starts examined (0 for closed-form methods).
    pub restarts_used: usize,
    /// Whether the reported solution met the gradient-norm stopping rule
    /// (always true for closed-form methods).
    pub converged: bool,
}

/// Options for the manifold optimizer.
#[derive(Clone, Debug)]
pub struct FefOptions {
    /// Number of Haar-random starts in addition to the identity start.
    pub restarts: usize,
    /// Iteration cap per start.
    pub max_iters: usize,
    /// Stop when the Riemannian gradient norm falls below this.
    pub grad_tol: f64,
    /// Seed for the Haar-random starts (start `r` uses stream `r`).
    pub seed: u64,
}

impl Default for FefOptions {
    fn default() -> Self {
        FefOptions {
            restarts: 20,
            max_iters: 500,
            grad_tol: 1e-9,
            seed: 0,
        }
    }
}

impl FefOptions {
    /// Cheaper profile used inside search loops that re-evaluate the final
    /// answer at full quality afterwards.
    pub fn quick_search() -> Self {
        FefOptions {
            restarts: 1,
            max_iters: 200,
            grad_tol: 1e-7,
            seed: 0,
        }
    }
}

pub(crate) fn two_equal_systems(labels_len: usize, dims: &[usize], context: &str) -> Result<usize> {
    if labels_len != 2 || dims.len() != 2 {
        return Err(TelecapError::DimensionMismatch {
            context: format!("{context}: need exactly two subsystems"),
            expected: 2,
            actual: labels_len,
        });
    }
    if dims[0] != dims[1] {
        return Err(TelecapError::DimensionMismatch {
            context: format!("{context}: local dimensions must match"),
            expected: dims[0],
            actual: dims[1],
        });
    }
    Ok(dims[0])
}

/// Overlap `⟨e|ρ|e⟩` with `|e⟩ = (I ⊗ U)|Φ⁺⟩` — the objective whose maximum
/// over `U` is the fully entangled fraction.
pub fn maximally_entangled_overlap(rho: &DensityMatrix, u: &Unitary) -> Result<f64> {
    let d = two_equal_systems(
        rho.layout().n(),
        rho.layout().dims(),
        "maximally_entangled_overlap",
    )?;
    if u.dim() != d {
        return Err(TelecapError::DimensionMismatch {
            context: "maximally_entangled_overlap: unitary size".into(),
            expected: d,
            actual: u.dim(),
        });
    }
    Ok(objective(rho.matrix(), d, u.matrix()))
}

/// `g(U) = ⟨e|ρ|e⟩` with `e[j·d+k] = U[k][j]/√d`.
pub(crate) fn objective(rho: &ComplexMatrix, d: usize, u: &ComplexMatrix) -> f64 {
    let e = entangled_vector(d, u);
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..e.len() {
        let mut row = Complex64::new(0.0, 0.0);
        for b in 0..e.len() {
            row += rho.get(a, b) * e[b];
        }
        acc += e[a].conj() * row;
    }
    acc.re
}

/// Amplitudes of `(I ⊗ U)|Φ⁺⟩` in the joint computational basis.
pub(crate) fn entangled_vector(d: usize, u: &ComplexMatrix) -> Vec<Complex64> {
    let s = 1.0 / (d as f64).sqrt();
    let mut e = vec![Complex64::new(0.0, 0.0); d * d];
    for j in 0..d {
        for k in 0..d {
            e[j * d + k] = u.get(k, j) * s;
        }
    }
    e
}

pub(crate) struct AscentOutcome {
    pub u: ComplexMatrix,
    pub value: f64,
    pub converged: bool,
}

/// Riemannian gradient ascent of `g(U)` with polar retraction and
/// backtracking line search.
pub(crate) fn ascend_unitary(
    rho: &ComplexMatrix,
    d: usize,
    start: ComplexMatrix,
    max_iters: usize,
    grad_tol: f64,
) -> Result<AscentOutcome> {
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let mut u = start;
    let mut value = objective(rho, d, &u);
    let mut converged = false;
    for _ in 0..max_iters {
        // Euclidean gradient G[k][j] = (ρe)[j·d+k]/√d, then project onto the
        // tangent space at U: Ξ = U·skew(U†G).
        let e = entangled_vector(d, &u);
        let mut w = vec![Complex64::new(0.0, 0.0); d * d];
        for a in 0..d * d {
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..d * d {
                acc += rho.get(a, b) * e[b];
            }
            w[a] = acc;
        }
        let mut g = ComplexMatrix::zeros(d, d);
        for j in 0..d {
            for k in 0..d {
                g.set(k, j, w[j * d + k] * inv_sqrt_d);
            }
        }
        let a = u.adjoint().mul(&g);
        let mut skew = ComplexMatrix::zeros(d, d);
        let mut grad_norm_sq = 0.0;
        for r in 0..d {
            for c in 0..d {
                let s = (a.get(r, c) - a.get(c, r).conj()) * 0.5;
                skew.set(r, c, s);
                grad_norm_sq += s.norm_sqr();
            }
        }
        if grad_norm_sq.sqrt() < grad_tol {
            converged = true;
            break;
        }
        let direction = u.mul(&skew);
        let mut alpha = 1.0;
        let mut improved = false;
        while alpha >= 1e-12 {
            let mut candidate = u.clone();
            candidate.axpy(Complex64::new(alpha, 0.0), &direction);
            let candidate = polar_unitary_factor(&candidate)?;
            let cand_value = objective(rho, d, &candidate);
            if cand_value > value {
                u = candidate;
                value = cand_value;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            // Stalled line search: the iterate is numerically critical.
            converged = grad_norm_sq.sqrt() < grad_tol.max(1e-7);
            break;
        }
    }
    Ok(AscentOutcome { u, value, converged })
}

/// Lower bound on the fully entangled fraction of a general two-qudit state
/// by multi-restart Riemannian ascent over `U ∈ U(d)`.
///
/// Starts are the identity plus `options.restarts` Haar-random unitaries on
/// independent RNG streams; the best final value wins, ties broken by lowest
/// start index. Deterministic for a fixed seed.
pub fn fef_general(rho: &DensityMatrix, options: &FefOptions) -> Result<FefResult> {
    let d = two_equal_systems(rho.layout().n(), rho.layout().dims(), "fef_general")?;
    let mut best: Option<AscentOutcome> = None;
    for r in 0..=options.restarts {
        let start = if r == 0 {
            ComplexMatrix::identity(d)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(r as u64);
            crate::qstate::haar_random_unitary(d, &mut rng)?
                .matrix()
                .clone()
        };
        let outcome = ascend_unitary(rho.matrix(), d, start, options.max_iters, options.grad_tol)?;
        let replace = match &best {
            None => true,
            Some(b) => outcome.value > b.value,
        };
        if replace {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least the identity start runs");
    Ok(FefResult {
        value: best.value.clamp(0.0, 1.0),
        maximizer: Unitary::from_trusted(polar_unitary_factor(&best.u)?),
        method: FefMethod::ManifoldOptimizer,
        restarts_used: options.restarts + 1,
        converged: best.converged,
    })
}

/// Columns of the magic-basis change matrix `Q`: the fixed maximally
/// entangled basis `{(|00⟩+|11⟩)/√2, i(|00⟩−|11⟩)/√2, i(|01⟩+|10⟩)/√2,
/// (|01⟩−|10⟩)/√2}` in row order `00, 01, 10, 11`.
pub(crate) fn magic_basis_matrix() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re = |x: f64| Complex64::new(x, 0.0);
    let im = |x: f64| Complex64::new(0.0, x);
    let mut q = ComplexMatrix::zeros(4, 4);
    // |m1⟩ = (|00⟩+|11⟩)/√2
    q.set(0, 0, re(s));
    q.set(3, 0, re(s));
    // |m2⟩ = i(|00⟩−|11⟩)/√2
    q.set(0, 1, im(s));
    q.set(3, 1, im(-s));
    // |m3⟩ = i(|01⟩+|10⟩)/√2
    q.set(1, 2, im(s));
    q.set(2, 2, im(s));
    // |m4⟩ = (|01⟩−|10⟩)/√2
    q.set(1, 3, re(s));
    q.set(2, 3, re(-s));
    q
}

/// Real part of `Q†MQ` as a real symmetric matrix (stored complex with zero
/// imaginary parts).
pub(crate) fn magic_real_part(m: &ComplexMatrix) -> ComplexMatrix {
    let q = magic_basis_matrix();
    let inner = q.adjoint().mul(m).mul(&q);
    let mut r = ComplexMatrix::zeros(4, 4);
    for a in 0..4 {
        for b in 0..4 {
            let v = 0.5 * (inner.get(a, b).re + inner.get(b, a).re);
            r.set(a, b, Complex64::new(v, 0.0));
        }
    }
    r
}

/// Largest eigenvalue of the real part of `m` in the magic basis — the
/// two-qubit fully entangled fraction of `m` when `m` is a density matrix.
pub(crate) fn magic_lambda_max(m: &ComplexMatrix) -> Result<f64> {
    let r = magic_real_part(m);
    let eig = eigh(&r)?;
    Ok(eig.values[3])
}

/// Exact fully entangled fraction of a two-qubit state.
///
/// In the magic basis the overlap with a maximally entangled state becomes a
/// quadratic form of a real unit vector, so the maximum is the top
/// eigenvalue of the real part of the transformed matrix, and the optimal
/// maximally entangled state is rebuilt from the top eigenvector.
pub fn fef_exact_qubit(rho: &DensityMatrix) -> Result<FefResult> {
    let d = two_equal_systems(rho.layout().n(), rho.layout().dims(), "fef_exact_qubit")?;
    if d != 2 {
        return Err(TelecapError::DimensionMismatch {
            context: "fef_exact_qubit: local dimension".into(),
            expected: 2,
            actual: d,
        });
    }
    let r = magic_real_part(rho.matrix());
    let eig = eigh(&r)?;
    let value = eig.values[3];
    // Top eigenvector; rotate its (numerically arbitrary) global phase away
    // so the coefficient vector is real, as the magic-basis argument requires.
    let mut c = [Complex64::new(0.0, 0.0); 4];
    let mut max_abs = 0.0;
    let mut max_idx = 0;
    for a in 0..4 {
        c[a] = eig.vectors.get(a, 3);
        if c[a].norm() > max_abs {
            max_abs = c[a].norm();
            max_idx = a;
        }
    }
    let phase = c[max_idx] / c[max_idx].norm();
    let mut norm_sq = 0.0;
    let mut real_c = [0.0f64; 4];
    for a in 0..4 {
        real_c[a] = (c[a] * phase.conj()).re;
        norm_sq += real_c[a] * real_c[a];
    }
    let scale = 1.0 / norm_sq.sqrt();
    // |e⟩ = Q c, then U from e[j·d+k] = U[k][j]/√d, i.e. U = √2·Eᵀ.
    let q = magic_basis_matrix();
    let mut e = [Complex64::new(0.0, 0.0); 4];
    for row in 0..4 {
        let mut acc = Complex64::new(0.0, 0.0);
        for col in 0..4 {
            acc += q.get(row, col) * (real_c[col] * scale);
        }
        e[row] = acc;
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut u = ComplexMatrix::zeros(2, 2);
    for j in 0..2 {
        for k in 0..2 {
            u.set(k, j, e[2 * j + k] * sqrt2);
        }
    }
    Ok(FefResult {
        value: value.clamp(0.0, 1.0),
        maximizer: Unitary::from_trusted(polar_unitary_factor(&u)?),
        method: FefMethod::MagicBasisExact,
        restarts_used: 0,
        converged: true,
    })
}

/// Closed-form fully entangled fraction of a pure two-qudit state:
/// `(Σ_i s_i)²/d` where `s_i` are the Schmidt coefficients.
pub fn fef_pure(ket: &Ket) -> Result<FefResult> {
    let d = two_equal_systems(ket.layout().n(), ket.layout().dims(), "fef_pure")?;
    let mut psi = ComplexMatrix::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            psi.set(j, k, ket.amplitudes()[j * d + k]);
        }
    }
    let (a, sigma, v) = svd_square(&psi)?;
    let sum: f64 = sigma.iter().sum();
    let value = sum * sum / d as f64;
    // ⟨e|ψ⟩ = (1/√d)·tr(Ψ·conj(U)) is maximized at conj(U) = V·A† for
    // Ψ = A·diag(σ)·V†, hitting |tr| = Σσ.
    let u = v.mul(&a.adjoint()).conj();
    Ok(FefResult {
        value: value.clamp(0.0, 1.0),
        maximizer: Unitary::from_trusted(polar_unitary_factor(&u)?),
        method: FefMethod::SchmidtPure,
        restarts_used: 0,
        converged: true,
    })
}

/// Best average teleportation fidelity over a state with fully entangled
/// fraction `f`: `F = (d·f + 1)/(d + 1)`.
pub fn fidelity_from_fraction(f: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(TelecapError::InvalidParameter(format!(
            "need d ≥ 2 (got {d})"
        )));
    }
    if !f.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&f) {
        return Err(TelecapError::InvalidParameter(format!(
            "fraction must lie in [0, 1] (got {f})"
        )));
    }
    let f = f.clamp(0.0, 1.0);
    Ok((d as f64 * f + 1.0) / (d as f64 + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory;
    use crate::qstate::{haar_random_ket, haar_random_unitary, SystemLayout};

    fn phi_plus_density(d: usize) -> DensityMatrix {
        factory::ghz(2, d).unwrap().to_density()
    }

    fn two_qubit_basis_density(digits: &[usize]) -> DensityMatrix {
        let layout = SystemLayout::uniform(2, 2).unwrap();
        Ket::basis_state(layout, digits).unwrap().to_density()
    }

    fn isotropic_two_qubit(p: f64, plus: bool) -> DensityMatrix {
        let layout = SystemLayout::uniform(2, 2).unwrap();
        let sign = if plus { 1.0 } else { -1.0 };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = Ket::new(
            layout.clone(),
            vec![
                Complex64::new(s, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(sign * s, 0.0),
            ],
        )
        .unwrap();
        let mixed = DensityMatrix::new(
            layout,
            ComplexMatrix::identity(4).scale(Complex64::new(0.25, 0.0)),
        )
        .unwrap();
        DensityMatrix::mixture(&[(p, bell.to_density()), (1.0 - p, mixed)]).unwrap()
    }

    #[test]
    fn exact_qubit_on_bell_state() {
        let res = fef_exact_qubit(&phi_plus_density(2)).unwrap();
        assert!((res.value - 1.0).abs() < 1e-12);
        assert_eq!(res.method, FefMethod::MagicBasisExact);
        assert!(res.converged);
        let re = maximally_entangled_overlap(&phi_plus_density(2), &res.maximizer).unwrap();
        assert!((re - res.value).abs() < 1e-10);
    }

    #[test]
    fn exact_qubit_on_isotropic_states() {
        for p in [0.0, 0.3, 0.7, 1.0] {
            for plus in [true, false] {
                let rho = isotropic_two_qubit(p, plus);
                let res = fef_exact_qubit(&rho).unwrap();
                assert!(
                    (res.value - (1.0 + 3.0 * p) / 4.0).abs() < 1e-12,
                    "p={p}, plus={plus}: got {}",
                    res.value
                );
                let re = maximally_entangled_overlap(&rho, &res.maximizer).unwrap();
                assert!((re - res.value).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn exact_qubit_on_product_state() {
        let res = fef_exact_qubit(&two_qubit_basis_density(&[0, 0])).unwrap();
        assert!((res.value - 0.5).abs() < 1e-12);
        let res = fef_exact_qubit(&two_qubit_basis_density(&[1, 0])).unwrap();
        assert!((res.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_qubit_rejects_wrong_shape() {
        let rho = factory::ghz(3, 2).unwrap().to_density();
        assert!(fef_exact_qubit(&rho).is_err());
        let rho = phi_plus_density(3);
        assert!(fef_exact_qubit(&rho).is_err());
    }

    #[test]
    fn general_matches_exact_on_qubits() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let opts = FefOptions::default();
        for _ in 0..10 {
            // Random rank-2 mixture of Haar kets.
            let layout = SystemLayout::uniform(2, 2).unwrap();
            let k1 = haar_random_ket(4, &mut rng).unwrap();
            let k2 = haar_random_ket(4, &mut rng).unwrap();
            let w: f64 = 0.3;
            let mut m = ComplexMatrix::zeros(4, 4);
            for (weight, k) in [(w, &k1), (1.0 - w, &k2)] {
                for a in 0..4 {
                    for b in 0..4 {
                        let add = k.amplitudes()[a] * k.amplitudes()[b].conj() * weight;
                        m.set(a, b, m.get(a, b) + add);
                    }
                }
            }
            let rho = DensityMatrix::new(layout, m).unwrap();
            let exact = fef_exact_qubit(&rho).unwrap();
            let general = fef_general(&rho, &opts).unwrap();
            assert!(
                (exact.value - general.value).abs() < 1e-6,
                "exact {} vs general {}",
                exact.value,
                general.value
            );
        }
    }

    #[test]
    fn general_on_bell_state_d3() {
        let res = fef_general(&phi_plus_density(3), &FefOptions::default()).unwrap();
        assert!((res.value - 1.0).abs() < 1e-9, "got {}", res.value);
        assert!(res.converged);
        assert_eq!(res.restarts_used, 21);
    }

    #[test]
    fn general_on_maximally_mixed_d3() {
        let layout = SystemLayout::uniform(2, 3).unwrap();
        let rho = DensityMatrix::new(
            layout,
            ComplexMatrix::identity(9).scale(Complex64::new(1.0 / 9.0, 0.0)),
        )
        .unwrap();
        let res = fef_general(&rho, &FefOptions::default()).unwrap();
        assert!((res.value - 1.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn general_seed_determinism() {
        let rho = isotropic_two_qubit(0.4, true);
        let a = fef_general(&rho, &FefOptions::default()).unwrap();
        let b = fef_general(&rho, &FefOptions::default()).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn pure_closed_form() {
        let res = fef_pure(&factory::ghz(2, 2).unwrap()).unwrap();
        assert!((res.value - 1.0).abs() < 1e-12);
        assert_eq!(res.method, FefMethod::SchmidtPure);

        let layout = SystemLayout::uniform(2, 2).unwrap();
        let ket = Ket::basis_state(layout.clone(), &[0, 0]).unwrap();
        let res = fef_pure(&ket).unwrap();
        assert!((res.value - 0.5).abs() < 1e-12);

        let a = 0.9f64.sqrt();
        let b = 0.1f64.sqrt();
        let ket = Ket::new(
            layout,
            vec![
                Complex64::new(a, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(b, 0.0),
            ],
        )
        .unwrap();
        let res = fef_pure(&ket).unwrap();
        assert!((res.value - 0.8).abs() < 1e-12);
        let cross = fef_general(&ket.to_density(), &FefOptions::default()).unwrap();
        assert!((res.value - cross.value).abs() < 1e-8);
        let re = maximally_entangled_overlap(&ket.to_density(), &res.maximizer).unwrap();
        assert!((re - res.value).abs() < 1e-10);
    }

    #[test]
    fn local_unitary_invariance_exact() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = isotropic_two_qubit(0.55, true);
        let f0 = fef_exact_qubit(&rho).unwrap().value;
        for _ in 0..5 {
            let v = haar_random_unitary(2, &mut rng).unwrap();
            let w = haar_random_unitary(2, &mut rng).unwrap();
            let rotated = rho
                .apply_local_unitary("A1", &v)
                .unwrap()
                .apply_local_unitary("A2", &w)
                .unwrap();
            let f1 = fef_exact_qubit(&rotated).unwrap().value;
            assert!((f0 - f1).abs() < 1e-10, "f0 {f0} vs f1 {f1}");
        }
    }

    #[test]
    fn identity_candidate_lower_bound() {
        let rho = isotropic_two_qubit(0.2, false);
        let direct = maximally_entangled_overlap(&rho, &Unitary::identity(2)).unwrap();
        let res = fef_exact_qubit(&rho).unwrap();
        assert!(res.value >= direct - 1e-12);
        let res = fef_general(&rho, &FefOptions::default()).unwrap();
        assert!(res.value >= direct - 1e-12);
    }

    #[test]
    fn fidelity_map_values_and_errors() {
        assert!((fidelity_from_fraction(1.0, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((fidelity_from_fraction(0.5, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((fidelity_from_fraction(0.85, 2).unwrap() - 0.9).abs() < 1e-15);
        assert!(fidelity_from_fraction(-0.1, 2).is_err());
        assert!(fidelity_from_fraction(1.1, 2).is_err());
        assert!(fidelity_from_fraction(0.5, 1).is_err());
    }
}
