//! Multi-qudit state primitives: system layouts, kets, density matrices,
//! unitaries, tensor products, partial traces, product-basis measurements,
//! and Haar sampling.
//!
//! Index convention: the subsystem order in a [`SystemLayout`] defines
//! mixed-radix indexing with the leftmost label slowest-varying, so the
//! basis ket `|i_1 i_2 … i_N⟩` sits at index `Σ_t i_t · stride_t` with
//! `stride_t = Π_{s>t} d_s`.

mod io;
pub mod linalg;
mod matrix;
mod random;

pub use io::{parse_state_json, read_state_file, state_to_json_string, write_state_file, LoadedState};
pub use matrix::{vec_inner, vec_kron, vec_norm_sqr, ComplexMatrix};
pub use random::{haar_random_ket, haar_random_unitary, random_density_matrix};
pub(crate) use random::haar_amplitudes;

use num_complex::Complex64;

use crate::error::TelecapError;
use crate::tolerance::Tolerances;
use crate::Result;

/// Ordered subsystem labels and local dimensions of a composite system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemLayout {
    labels: Vec<String>,
    dims: Vec<usize>,
}

impl SystemLayout {
    /// Build a layout, validating label distinctness, local dimensions ≥ 2,
    /// and the total-dimension guardrail.
    pub fn new(labels: Vec<String>, dims: Vec<usize>) -> Result<Self> {
        SystemLayout::new_with(labels, dims, &Tolerances::default())
    }

    /// [`SystemLayout::new`] with explicit tolerances (for a different
    /// total-dimension cap).
    pub fn new_with(labels: Vec<String>, dims: Vec<usize>, tol: &Tolerances) -> Result<Self> {
        if labels.is_empty() || labels.len() != dims.len() {
            return Err(TelecapError::InvalidParameter(format!(
                "layout needs matching non-empty labels and dims (got {} labels, {} dims)",
                labels.len(),
                dims.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(TelecapError::InvalidLabel("empty label".into()));
            }
            if labels[..i].contains(l) {
                return Err(TelecapError::InvalidLabel(format!("duplicate label {l:?}")));
            }
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(TelecapError::InvalidParameter(format!(
                "local dimensions must be ≥ 2 (got {d})"
            )));
        }
        let mut total: usize = 1;
        for &d in &dims {
            total = total.checked_mul(d).ok_or_else(|| TelecapError::DimensionTooLarge {
                requested: usize::MAX,
                max: tol.max_total_dim,
            })?;
        }
        if total > tol.max_total_dim {
            return Err(TelecapError::DimensionTooLarge {
                requested: total,
                max: tol.max_total_dim,
            });
        }
        Ok(SystemLayout { labels, dims })
    }

    /// Layout of `n` qudits of equal dimension `d`, labeled `A1 … An`.
    pub fn uniform(n: usize, d: usize) -> Result<Self> {
        SystemLayout::uniform_with(n, d, &Tolerances::default())
    }

    /// [`SystemLayout::uniform`] with explicit tolerances.
    pub fn uniform_with(n: usize, d: usize, tol: &Tolerances) -> Result<Self> {
        SystemLayout::new_with(default_labels(n), vec![d; n], tol)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Position of a label, if present.
    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Mixed-radix strides (leftmost slowest-varying).
    pub fn strides(&self) -> Vec<usize> {
        let n = self.n();
        let mut s = vec![1usize; n];
        for t in (0..n.saturating_sub(1)).rev() {
            s[t] = s[t + 1] * self.dims[t + 1];
        }
        s
    }

    /// Full index of a digit string.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.n());
        let strides = self.strides();
        digits.iter().zip(&strides).map(|(d, s)| d * s).sum()
    }

    /// Digit string of a full index.
    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.n()];
        for t in (0..self.n()).rev() {
            out[t] = index % self.dims[t];
            index /= self.dims[t];
        }
        out
    }

    /// Concatenation for tensor products; fails on label collisions or a
    /// guardrail overflow.
    pub fn concat(&self, other: &SystemLayout, tol: &Tolerances) -> Result<SystemLayout> {
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SystemLayout::new_with(labels, dims, tol)
    }

    /// Sub-layout of the given positions (kept in the given order).
    pub(crate) fn sub_layout(&self, positions: &[usize]) -> SystemLayout {
        SystemLayout {
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
            dims: positions.iter().map(|&p| self.dims[p]).collect(),
        }
    }

    /// Resolve distinct labels to positions.
    pub(crate) fn resolve(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for &l in labels {
            let p = self
                .position(l)
                .ok_or_else(|| TelecapError::InvalidLabel(format!("unknown label {l:?}")))?;
            if out.contains(&p) {
                return Err(TelecapError::InvalidLabel(format!("repeated label {l:?}")));
            }
            out.push(p);
        }
        Ok(out)
    }
}

/// Default party labels `A1 … An`.
pub fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("A{i}")).collect()
}

/// Normalized pure state on a composite system.
#[derive(Clone, Debug)]
pub struct Ket {
    layout: SystemLayout,
    amplitudes: Vec<Complex64>,
}

impl Ket {
    /// Build a ket, validating length, finiteness, and unit norm.
    pub fn new(layout: SystemLayout, amplitudes: Vec<Complex64>) -> Result<Self> {
        Ket::new_with(layout, amplitudes, &Tolerances::default())
    }

    /// [`Ket::new`] with explicit tolerances.
    pub fn new_with(
        layout: SystemLayout,
        amplitudes: Vec<Complex64>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(TelecapError::dim_mismatch(
                "ket amplitude count",
                layout.total_dim(),
                amplitudes.len(),
            ));
        }
        if !amplitudes.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(TelecapError::InvalidKet("non-finite amplitude".into()));
        }
        let norm = vec_norm_sqr(&amplitudes).sqrt();
        if (norm - 1.0).abs() > tol.unit_norm {
            return Err(TelecapError::InvalidKet(format!(
                "norm {norm} deviates from 1 beyond {}",
                tol.unit_norm
            )));
        }
        Ok(Ket { layout, amplitudes })
    }

    /// Computational basis state `|digits⟩`.
    pub fn basis_state(layout: SystemLayout, digits: &[usize]) -> Result<Self> {
        if digits.len() != layout.n() {
            return Err(TelecapError::dim_mismatch(
                "basis-state digit count",
                layout.n(),
                digits.len(),
            ));
        }
        for (t, (&dig, &dim)) in digits.iter().zip(layout.dims()).enumerate() {
            if dig >= dim {
                return Err(TelecapError::InvalidParameter(format!(
                    "digit {dig} out of range for subsystem {t} of dimension {dim}"
                )));
            }
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.total_dim()];
        amplitudes[layout.index_of(digits)] = Complex64::new(1.0, 0.0);
        Ok(Ket { layout, amplitudes })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Hermitian inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Complex64 {
        vec_inner(&self.amplitudes, &other.amplitudes)
    }

    /// Tensor product, left operand slower-varying.
    pub fn tensor(&self, other: &Ket) -> Result<Ket> {
        self.tensor_with(other, &Tolerances::default())
    }

    /// [`Ket::tensor`] with explicit tolerances for the guardrail.
    pub fn tensor_with(&self, other: &Ket, tol: &Tolerances) -> Result<Ket> {
        let layout = self.layout.concat(&other.layout, tol)?;
        Ok(Ket {
            layout,
            amplitudes: vec_kron(&self.amplitudes, &other.amplitudes),
        })
    }

    /// Rank-1 density matrix `|ψ⟩⟨ψ|`.
    pub fn to_density(&self) -> DensityMatrix {
        let n = self.amplitudes.len();
        let m = ComplexMatrix::from_fn(n, n, |r, c| {
            self.amplitudes[r] * self.amplitudes[c].conj()
        });
        DensityMatrix::from_trusted(self.layout.clone(), m)
    }
}

/// Hermitian, unit-trace, positive-semidefinite operator on a composite
/// system: the central state representation.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    layout: SystemLayout,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Build a density matrix with full validation (Hermiticity, unit trace,
    /// positive semidefiniteness within the configured slack).
    pub fn new(layout: SystemLayout, matrix: ComplexMatrix) -> Result<Self> {
        DensityMatrix::new_with(layout, matrix, &Tolerances::default())
    }

    /// [`DensityMatrix::new`] with explicit tolerances.
    pub fn new_with(
        layout: SystemLayout,
        matrix: ComplexMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let rho = DensityMatrix { layout, matrix };
        rho.validate(tol)?;
        Ok(rho)
    }

    /// Construction from operations that preserve density-matrix structure
    /// (mixing, conjugation, partial trace, branch extraction). Skips the
    /// O(n³) positivity certificate; callers guarantee well-formedness.
    pub(crate) fn from_trusted(layout: SystemLayout, matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(matrix.rows(), layout.total_dim());
        debug_assert_eq!(matrix.cols(), layout.total_dim());
        DensityMatrix { layout, matrix }
    }

    /// Re-check all invariants: size, finiteness, Hermiticity, unit trace,
    /// and minimum eigenvalue ≥ −psd_slack.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let d = self.layout.total_dim();
        if self.matrix.rows() != d || self.matrix.cols() != d {
            return Err(TelecapError::dim_mismatch(
                "density matrix size",
                d,
                self.matrix.rows(),
            ));
        }
        if !self.matrix.is_finite() {
            return Err(TelecapError::InvalidDensityMatrix("non-finite entry".into()));
        }
        let herm = self.matrix.hermiticity_error();
        if herm > tol.hermiticity {
            return Err(TelecapError::InvalidDensityMatrix(format!(
                "hermiticity deviation {herm:.3e} exceeds {:.3e}",
                tol.hermiticity
            )));
        }
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > tol.hermiticity || tr.im.abs() > tol.hermiticity {
            return Err(TelecapError::InvalidDensityMatrix(format!(
                "trace {tr} deviates from 1"
            )));
        }
        if !linalg::min_eigenvalue_at_least(&self.matrix, tol.psd_slack) {
            return Err(TelecapError::InvalidDensityMatrix(format!(
                "minimum eigenvalue below −{:.3e}",
                tol.psd_slack
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Convex mixture of same-layout states. Weights must be nonnegative and
    /// sum to 1 within 1e−12.
    pub fn mixture(components: &[(f64, DensityMatrix)]) -> Result<DensityMatrix> {
        let (w0, first) = components
            .first()
            .ok_or_else(|| TelecapError::InvalidParameter("empty mixture".into()))?;
        let mut total = *w0;
        let layout = first.layout.clone();
        let dim = layout.total_dim();
        let mut acc = first.matrix.scale(Complex64::new(*w0, 0.0));
        for (w, rho) in &components[1..] {
            if rho.layout != layout {
                return Err(TelecapError::InvalidParameter(
                    "mixture components must share a layout".into(),
                ));
            }
            acc.axpy(Complex64::new(*w, 0.0), &rho.matrix);
            total += *w;
        }
        if components.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(TelecapError::InvalidParameter(
                "mixture weights must be nonnegative and sum to 1".into(),
            ));
        }
        debug_assert_eq!(acc.rows(), dim);
        Ok(DensityMatrix::from_trusted(layout, acc))
    }

    /// `⟨ψ|ρ|ψ⟩` (real part; the imaginary part vanishes for Hermitian ρ).
    pub fn expectation(&self, psi: &Ket) -> f64 {
        let v = self.matrix.apply(psi.amplitudes());
        vec_inner(psi.amplitudes(), &v).re
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        let n = self.matrix.rows();
        let e = self.matrix.entries();
        // Tr ρ² = Σ_{rc} ρ_{rc} ρ_{cr} = Σ |ρ_{rc}|² for Hermitian ρ.
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += (e[r * n + c] * e[c * n + r]).re;
            }
        }
        acc
    }

    /// Tensor product, left operand slower-varying.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        self.tensor_with(other, &Tolerances::default())
    }

    /// [`DensityMatrix::tensor`] with explicit tolerances for the guardrail.
    pub fn tensor_with(&self, other: &DensityMatrix, tol: &Tolerances) -> Result<DensityMatrix> {
        let layout = self.layout.concat(&other.layout, tol)?;
        Ok(DensityMatrix::from_trusted(
            layout,
            self.matrix.kron(&other.matrix),
        ))
    }

    /// Conjugation `U ρ U†` by a local unitary on one labeled subsystem.
    pub fn apply_local_unitary(&self, label: &str, u: &Unitary) -> Result<DensityMatrix> {
        let pos = self
            .layout
            .position(label)
            .ok_or_else(|| TelecapError::InvalidLabel(format!("unknown label {label:?}")))?;
        if self.layout.dims()[pos] != u.dim() {
            return Err(TelecapError::dim_mismatch(
                "local unitary dimension",
                self.layout.dims()[pos],
                u.dim(),
            ));
        }
        let mut out = ComplexMatrix::zeros(self.matrix.rows(), self.matrix.cols());
        apply_local_unitary_into(&self.matrix, self.layout.dims(), pos, u.matrix(), &mut out);
        Ok(DensityMatrix::from_trusted(self.layout.clone(), out))
    }
}

/// Validated `d × d` unitary operator.
#[derive(Clone, Debug)]
pub struct Unitary {
    matrix: ComplexMatrix,
}

impl Unitary {
    /// Build a unitary, validating `U†U = I` entrywise.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Unitary::new_with(matrix, &Tolerances::default())
    }

    /// [`Unitary::new`] with explicit tolerances.
    pub fn new_with(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(TelecapError::dim_mismatch(
                "unitary shape",
                matrix.rows(),
                matrix.cols(),
            ));
        }
        if !matrix.is_finite() {
            return Err(TelecapError::InvalidUnitary("non-finite entry".into()));
        }
        let err = matrix.unitarity_error();
        if err > tol.unitarity {
            return Err(TelecapError::InvalidUnitary(format!(
                "U†U deviates from identity by {err:.3e} (tolerance {:.3e})",
                tol.unitarity
            )));
        }
        Ok(Unitary { matrix })
    }

    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.unitarity_error() < 1e-9);
        Unitary { matrix }
    }

    pub fn identity(d: usize) -> Self {
        Unitary {
            matrix: ComplexMatrix::identity(d),
        }
    }

    /// The qubit Hadamard gate; its measurement basis is the X basis
    /// `{(|0⟩ ± |1⟩)/√2}`.
    pub fn hadamard() -> Self {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Unitary {
            matrix: ComplexMatrix::from_fn(2, 2, |r, c| {
                if r == 1 && c == 1 {
                    -s
                } else {
                    s
                }
            }),
        }
    }

    /// Discrete Fourier matrix `F_{jk} = ω^{jk}/√d` with `ω = e^{2πi/d}`.
    /// For `d = 2` this is the Hadamard gate.
    pub fn fourier(d: usize) -> Self {
        let inv = 1.0 / (d as f64).sqrt();
        Unitary {
            matrix: ComplexMatrix::from_fn(d, d, |r, c| {
                Complex64::from_polar(inv, 2.0 * std::f64::consts::PI * (r * c) as f64 / d as f64)
            }),
        }
    }

    /// Measuring after this rotation realizes the Fourier basis
    /// `{F|j⟩}` (adjoint of [`Unitary::fourier`]).
    pub fn fourier_adjoint(d: usize) -> Self {
        Unitary {
            matrix: Unitary::fourier(d).matrix.adjoint(),
        }
    }

    /// Generalized shift `X^a` with `X|i⟩ = |i+1 mod d⟩`.
    pub fn shift_x(d: usize, a: i64) -> Self {
        let a = a.rem_euclid(d as i64) as usize;
        Unitary {
            matrix: ComplexMatrix::from_fn(d, d, |r, c| {
                Complex64::new(if r == (c + a) % d { 1.0 } else { 0.0 }, 0.0)
            }),
        }
    }

    /// Generalized clock `Z^b` with `Z|i⟩ = ω^i|i⟩`, `ω = e^{2πi/d}`.
    pub fn clock_z(d: usize, b: i64) -> Self {
        Unitary {
            matrix: ComplexMatrix::from_fn(d, d, |r, c| {
                if r == c {
                    Complex64::from_polar(
                        1.0,
                        2.0 * std::f64::consts::PI * (r as i64 * b) as f64 / d as f64,
                    )
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Product `self · rhs`.
    pub fn mul(&self, rhs: &Unitary) -> Unitary {
        Unitary {
            matrix: self.matrix.mul(&rhs.matrix),
        }
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary {
            matrix: self.matrix.adjoint(),
        }
    }
}

/// One controller outcome: digit string, probability, conditional state on
/// the unmeasured subsystems, and a degeneracy flag for branches whose
/// probability fell below the floor (their state is a placeholder maximally
/// mixed operator that downstream averages weight by the tiny probability).
#[derive(Clone, Debug)]
pub struct Branch {
    pub outcome: Vec<usize>,
    pub probability: f64,
    pub state: DensityMatrix,
    pub degenerate: bool,
}

/// All outcomes of a product-basis measurement on a subset of parties.
#[derive(Clone, Debug)]
pub struct BranchTable {
    pub measured: Vec<String>,
    pub unitaries: Vec<Unitary>,
    pub branches: Vec<Branch>,
}

/// Partial trace onto the subsystems named in `keep` (a set; the result
/// keeps them in their original layout order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    let layout = rho.layout();
    if keep.is_empty() {
        return Err(TelecapError::InvalidParameter(
            "partial trace must keep at least one subsystem".into(),
        ));
    }
    let mut keep_positions = layout.resolve(keep)?;
    keep_positions.sort_unstable();
    let traced_positions: Vec<usize> = (0..layout.n())
        .filter(|p| !keep_positions.contains(p))
        .collect();
    if traced_positions.is_empty() {
        return Ok(rho.clone());
    }
    let kept_offsets = subspace_offsets(layout, &keep_positions);
    let traced_offsets = subspace_offsets(layout, &traced_positions);
    let out_layout = layout.sub_layout(&keep_positions);
    let dk = kept_offsets.len();
    let n = layout.total_dim();
    let src = rho.matrix().entries();
    let mut out = ComplexMatrix::zeros(dk, dk);
    for (a, &ra) in kept_offsets.iter().enumerate() {
        for (b, &rb) in kept_offsets.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in &traced_offsets {
                acc += src[(ra + t) * n + (rb + t)];
            }
            out.set(a, b, acc);
        }
    }
    Ok(DensityMatrix::from_trusted(out_layout, out))
}

/// Measure the named parties in the product basis defined by per-party
/// unitaries: outcome `J` occurs with probability `⟨J|(⊗U) ρ (⊗U)†|J⟩`, so
/// the physical measurement basis on party `t` is `{U_t†|j⟩}` (for example,
/// the Hadamard gate realizes the qubit X basis).
///
/// Returns every outcome in lexicographic order of `J` over the parties in
/// the order given, with conditional states on the unmeasured subsystems.
pub fn measure_product_basis(
    rho: &DensityMatrix,
    parties: &[&str],
    unitaries: &[Unitary],
) -> Result<BranchTable> {
    measure_product_basis_with(rho, parties, unitaries, &Tolerances::default())
}

/// [`measure_product_basis`] with an explicit probability floor.
pub fn measure_product_basis_with(
    rho: &DensityMatrix,
    parties: &[&str],
    unitaries: &[Unitary],
    tol: &Tolerances,
) -> Result<BranchTable> {
    let layout = rho.layout();
    if parties.is_empty() {
        return Err(TelecapError::InvalidParameter(
            "measurement needs at least one party".into(),
        ));
    }
    let positions = layout.resolve(parties)?;
    if positions.len() == layout.n() {
        return Err(TelecapError::InvalidParameter(
            "at least one subsystem must remain unmeasured".into(),
        ));
    }
    if unitaries.len() != parties.len() {
        return Err(TelecapError::dim_mismatch(
            "one unitary per measured party",
            parties.len(),
            unitaries.len(),
        ));
    }
    for (t, (&p, u)) in positions.iter().zip(unitaries).enumerate() {
        if layout.dims()[p] != u.dim() {
            return Err(TelecapError::dim_mismatch(
                format!("unitary dimension for party {:?}", parties[t]),
                layout.dims()[p],
                u.dim(),
            ));
        }
    }

    // Rotate the measured parties, then read conditional blocks off the
    // diagonal in the measured indices.
    let dims = layout.dims().to_vec();
    let n = layout.total_dim();
    let mut rotated = rho.matrix().clone();
    let mut scratch = ComplexMatrix::zeros(n, n);
    for (&p, u) in positions.iter().zip(unitaries) {
        apply_local_unitary_into(&rotated, &dims, p, u.matrix(), &mut scratch);
        std::mem::swap(&mut rotated, &mut scratch);
    }

    let mut kept_positions: Vec<usize> = (0..layout.n())
        .filter(|p| !positions.contains(p))
        .collect();
    kept_positions.sort_unstable();
    let kept_layout = layout.sub_layout(&kept_positions);
    let kept_offsets = subspace_offsets(layout, &kept_positions);
    let branch_offsets = outcome_offsets(layout, &positions);
    let dk = kept_offsets.len();
    let src = rotated.entries();

    let mut branches = Vec::with_capacity(branch_offsets.len());
    let mut digits = vec![0usize; positions.len()];
    for &off in &branch_offsets {
        let mut p_j = 0.0f64;
        for &k in &kept_offsets {
            p_j += src[(off + k) * n + (off + k)].re;
        }
        let (state, degenerate) = if p_j < tol.probability_floor {
            let mut m = ComplexMatrix::zeros(dk, dk);
            let inv = Complex64::new(1.0 / dk as f64, 0.0);
            for i in 0..dk {
                m.set(i, i, inv);
            }
            (DensityMatrix::from_trusted(kept_layout.clone(), m), true)
        } else {
            let inv = Complex64::new(1.0 / p_j, 0.0);
            let mut m = ComplexMatrix::zeros(dk, dk);
            for (a, &ka) in kept_offsets.iter().enumerate() {
                for (b, &kb) in kept_offsets.iter().enumerate() {
                    m.set(a, b, src[(off + ka) * n + (off + kb)] * inv);
                }
            }
            (DensityMatrix::from_trusted(kept_layout.clone(), m), false)
        };
        branches.push(Branch {
            outcome: digits.clone(),
            probability: p_j.max(0.0),
            state,
            degenerate,
        });
        // Lexicographic increment over the measured parties' digit string.
        for t in (0..positions.len()).rev() {
            digits[t] += 1;
            if digits[t] < dims[positions[t]] {
                break;
            }
            digits[t] = 0;
        }
    }

    Ok(BranchTable {
        measured: parties.iter().map(|s| s.to_string()).collect(),
        unitaries: unitaries.to_vec(),
        branches,
    })
}

/// Offsets of all digit combinations over `positions` (other digits zero),
/// enumerated lexicographically in the order the positions are given.
pub(crate) fn outcome_offsets(layout: &SystemLayout, positions: &[usize]) -> Vec<usize> {
    let strides = layout.strides();
    let mut offsets = vec![0usize];
    for &p in positions {
        let d = layout.dims()[p];
        let s = strides[p];
        let mut next = Vec::with_capacity(offsets.len() * d);
        for &base in &offsets {
            for digit in 0..d {
                next.push(base + digit * s);
            }
        }
        offsets = next;
    }
    offsets
}

/// Offsets of all digit combinations over `positions`, enumerated in the
/// mixed-radix order of the positions as given (used for kept subsystems,
/// where positions are ascending so the order matches the sub-layout).
pub(crate) fn subspace_offsets(layout: &SystemLayout, positions: &[usize]) -> Vec<usize> {
    outcome_offsets(layout, positions)
}

/// `dst = (I ⊗ U ⊗ I) · src · (I ⊗ U ⊗ I)†` with `U` acting on subsystem
/// `pos` of the mixed-radix index.
pub(crate) fn apply_local_unitary_into(
    src: &ComplexMatrix,
    dims: &[usize],
    pos: usize,
    u: &ComplexMatrix,
    dst: &mut ComplexMatrix,
) {
    let d = dims[pos];
    let total: usize = dims.iter().product();
    debug_assert_eq!(src.rows(), total);
    debug_assert_eq!(u.rows(), d);
    let right: usize = dims[pos + 1..].iter().product();
    let left: usize = total / (d * right);
    let n = total;
    let zero = Complex64::new(0.0, 0.0);

    // Left factor: mix rows within each (left, right) block.
    {
        let s = src.entries();
        let o = dst.entries_mut();
        o.fill(zero);
        for l in 0..left {
            for r in 0..right {
                let base = l * d * right + r;
                for iout in 0..d {
                    let orow = (base + iout * right) * n;
                    for iin in 0..d {
                        let coeff = u.get(iout, iin);
                        if coeff.re == 0.0 && coeff.im == 0.0 {
                            continue;
                        }
                        let srow = (base + iin * right) * n;
                        for col in 0..n {
                            o[orow + col] += coeff * s[srow + col];
                        }
                    }
                }
            }
        }
    }

    // Right factor: mix columns within each row, in place.
    let mut scratch = vec![zero; d];
    let o = dst.entries_mut();
    for row in 0..n {
        let row_slice = &mut o[row * n..(row + 1) * n];
        for l in 0..left {
            for r in 0..right {
                let base = l * d * right + r;
                for (i, s) in scratch.iter_mut().enumerate() {
                    *s = row_slice[base + i * right];
                }
                for i in 0..d {
                    let mut acc = zero;
                    for (ip, s) in scratch.iter().enumerate() {
                        acc += *s * u.get(i, ip).conj();
                    }
                    row_slice[base + i * right] = acc;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ghz3() -> Ket {
        let layout = SystemLayout::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec![2, 2, 2],
        )
        .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![c(0.0, 0.0); 8];
        amps[0] = c(s, 0.0);
        amps[7] = c(s, 0.0);
        Ket::new(layout, amps).unwrap()
    }

    #[test]
    fn tensor_of_basis_kets() {
        let l1 = SystemLayout::new(vec!["A".into()], vec![2]).unwrap();
        let l2 = SystemLayout::new(vec!["B".into()], vec![2]).unwrap();
        let zero_a = Ket::basis_state(l1, &[0]).unwrap();
        let zero_b = Ket::basis_state(l2, &[0]).unwrap();
        let both = zero_a.tensor(&zero_b).unwrap();
        let amps: Vec<f64> = both.amplitudes().iter().map(|z| z.re).collect();
        assert_eq!(amps, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn tensor_of_maximally_mixed_is_maximally_mixed() {
        let half = |label: &str| {
            let layout = SystemLayout::new(vec![label.into()], vec![2]).unwrap();
            let m = ComplexMatrix::identity(2).scale(c(0.5, 0.0));
            DensityMatrix::new(layout, m).unwrap()
        };
        let product = half("A").tensor(&half("B")).unwrap();
        let expect = ComplexMatrix::identity(4).scale(c(0.25, 0.0));
        assert!(product.matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn tensor_rejects_label_collision() {
        let layout = SystemLayout::new(vec!["A".into()], vec![2]).unwrap();
        let k = Ket::basis_state(layout, &[0]).unwrap();
        assert!(k.tensor(&k).is_err());
    }

    #[test]
    fn ghz_partial_trace_is_classical_mixture() {
        let rho = ghz3().to_density();
        let reduced = partial_trace(&rho, &["A", "C"]).unwrap();
        assert_eq!(reduced.layout().labels(), &["A".to_string(), "C".to_string()]);
        let mut expect = ComplexMatrix::zeros(4, 4);
        expect.set(0, 0, c(0.5, 0.0));
        expect.set(3, 3, c(0.5, 0.0));
        assert!(reduced.matrix().max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn partial_trace_of_product_recovers_factor() {
        let layout_a = SystemLayout::new(vec!["A".into()], vec![2]).unwrap();
        let m = ComplexMatrix::from_data(
            2,
            2,
            vec![c(0.75, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.25, 0.0)],
        )
        .unwrap();
        let rho_a = DensityMatrix::new(layout_a, m).unwrap();
        let layout_b = SystemLayout::new(vec!["B".into()], vec![3]).unwrap();
        let rho_b = DensityMatrix::new(
            layout_b,
            ComplexMatrix::identity(3).scale(c(1.0 / 3.0, 0.0)),
        )
        .unwrap();
        let joint = rho_a.tensor(&rho_b).unwrap();
        let back = partial_trace(&joint, &["A"]).unwrap();
        assert!(back.matrix().max_abs_diff(rho_a.matrix()) < 1e-14);
    }

    #[test]
    fn partial_trace_of_maximally_entangled_is_maximally_mixed() {
        let layout = SystemLayout::new(vec!["A".into(), "B".into()], vec![2, 2]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = Ket::new(layout, vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap();
        let reduced = partial_trace(&phi.to_density(), &["A"]).unwrap();
        let expect = ComplexMatrix::identity(2).scale(c(0.5, 0.0));
        assert!(reduced.matrix().max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn ghz_x_measurement_yields_bell_branches() {
        let rho = ghz3().to_density();
        let table = measure_product_basis(&rho, &["B"], &[Unitary::hadamard()]).unwrap();
        assert_eq!(table.branches.len(), 2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (idx, sign) in [(0usize, 1.0f64), (1, -1.0)] {
            let b = &table.branches[idx];
            assert!((b.probability - 0.5).abs() < 1e-12);
            assert_eq!(b.outcome, vec![idx]);
            let phi = Ket::new(
                b.state.layout().clone(),
                vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(sign * s, 0.0)],
            )
            .unwrap();
            assert!((b.state.expectation(&phi) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn measurement_of_uncorrelated_party_leaves_state_untouched() {
        let layout = |l: &str| SystemLayout::new(vec![l.into()], vec![2]).unwrap();
        let rho_a = DensityMatrix::new(
            layout("A"),
            ComplexMatrix::from_data(2, 2, vec![c(0.8, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.2, 0.0)])
                .unwrap(),
        )
        .unwrap();
        let rho_b = DensityMatrix::new(
            layout("B"),
            ComplexMatrix::from_data(2, 2, vec![c(0.6, 0.0), c(0.1, 0.1), c(0.1, -0.1), c(0.4, 0.0)])
                .unwrap(),
        )
        .unwrap();
        let rho_c = DensityMatrix::new(
            layout("C"),
            ComplexMatrix::identity(2).scale(c(0.5, 0.0)),
        )
        .unwrap();
        let joint = rho_a.tensor(&rho_b).unwrap().tensor(&rho_c).unwrap();
        let expect_ab = rho_a.tensor(&rho_b).unwrap();
        let table = measure_product_basis(&joint, &["C"], &[Unitary::hadamard()]).unwrap();
        for b in &table.branches {
            assert!((b.probability - 0.5).abs() < 1e-12);
            assert!(b.state.matrix().max_abs_diff(expect_ab.matrix()) < 1e-12);
        }
    }

    #[test]
    fn branch_probabilities_sum_to_one() {
        let rho = ghz3().to_density();
        let table = measure_product_basis(
            &rho,
            &["B", "C"],
            &[Unitary::hadamard(), Unitary::fourier(2)],
        )
        .unwrap();
        let total: f64 = table.branches.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(table.branches.len(), 4);
    }

    #[test]
    fn layout_rejects_duplicates_and_small_dims() {
        assert!(SystemLayout::new(vec!["A".into(), "A".into()], vec![2, 2]).is_err());
        assert!(SystemLayout::new(vec!["A".into()], vec![1]).is_err());
    }

    #[test]
    fn guardrail_rejects_oversized_layouts() {
        let err = SystemLayout::uniform(9, 3).unwrap_err();
        match err {
            TelecapError::DimensionTooLarge { requested, max } => {
                assert_eq!(requested, 19683);
                assert_eq!(max, 6561);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn gate_constructors_are_unitary() {
        for u in [
            Unitary::hadamard(),
            Unitary::fourier(3),
            Unitary::fourier_adjoint(3),
            Unitary::shift_x(3, 2),
            Unitary::clock_z(3, 1),
        ] {
            assert!(u.matrix().unitarity_error() < 1e-12);
        }
        // X and Z obey the Weyl commutation Z·X = ω·X·Z.
        let d = 3;
        let x = Unitary::shift_x(d, 1);
        let z = Unitary::clock_z(d, 1);
        let zx = z.mul(&x);
        let xz_scaled = x.mul(&z).matrix().scale(Complex64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI / d as f64,
        ));
        assert!(zx.matrix().max_abs_diff(&xz_scaled) < 1e-12);
    }
}
