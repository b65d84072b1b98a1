//! Controlled teleportation capability of multiparty states.
//!
//! In the controlled protocol, `N − 2` controllers each measure their own
//! subsystem in a local orthonormal basis and broadcast the outcome `J`; the
//! remaining pair `(i, j)` then teleports over the conditional two-qudit
//! state `σ^{U,J}`. The pair's capability is the outcome-averaged fully
//! entangled fraction, maximized over the controllers' product bases:
//!
//! ```text
//! f_ij = max over (U_1, …, U_{N−2}) of  Σ_J p_J · f(σ^{U,J}),
//! F_ij = (d·f_ij + 1)/(d + 1),
//! ```
//!
//! and a state's overall usefulness is judged by the minimum of `F_ij` over
//! all pairs, compared against the exact `k`-separability thresholds.
//!
//! The outer maximization is a coordinate ascent in exponential coordinates
//! around warm-start bases (identity, the Fourier-adjoint basis that is
//! optimal for GHZ-type states, and Haar-random bases); the inner fully
//! entangled fraction is exact for qubits and delegated to the manifold
//! optimizer otherwise. Reported values are certified lower bounds.

use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::TelecapError;
use crate::fef::{self, FefOptions};
use crate::qstate::linalg::expi_hermitian;
use crate::qstate::{
    haar_random_unitary, measure_product_basis_with, ComplexMatrix, DensityMatrix, Ket, Unitary,
};
pub use crate::qstate::{Branch, BranchTable};
use crate::thresholds::{threshold_t, Rational};
use crate::tolerance::Tolerances;
use crate::Result;

/// Options for the controlled-teleportation search.
#[derive(Clone, Debug)]
pub struct CtelOptions {
    /// Haar-random outer restarts in addition to the identity and
    /// Fourier-adjoint warm starts.
    pub restarts: usize,
    /// Seed for the random outer restarts (restart `r` uses stream `r`).
    pub seed: u64,
    /// Outer convergence: stop when a full coordinate sweep improves the
    /// objective by less than this.
    pub sweep_tol: f64,
    /// Cap on outer coordinate sweeps per restart.
    pub max_sweeps: usize,
    /// Inner fully-entangled-fraction options for the final evaluation at
    /// the chosen basis.
    pub inner: FefOptions,
    /// Cheaper inner options used while searching; the final value is always
    /// re-evaluated with `inner`, whose restart streams are a superset, so
    /// the reported value never drops below the search value.
    pub inner_search: FefOptions,
    /// Tolerances for measurement branch handling.
    pub tolerances: Tolerances,
}

impl Default for CtelOptions {
    fn default() -> Self {
        CtelOptions {
            restarts: 10,
            seed: 0,
            sweep_tol: 1e-8,
            max_sweeps: 60,
            inner: FefOptions::default(),
            inner_search: FefOptions::quick_search(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Capability of one pair: the optimized outcome-averaged fraction with its
/// fidelity image, the maximizing controller bases, and the branch table at
/// the optimum.
#[derive(Clone, Debug)]
pub struct CtelResult {
    /// The pair `(i, j)` in the order requested.
    pub pair: (String, String),
    /// Certified lower bound on the pair's outcome-averaged fully entangled
    /// fraction.
    pub fraction: f64,
    /// `(d·fraction + 1)/(d + 1)`.
    pub fidelity: f64,
    /// Gauge-fixed controller unitaries attaining `fraction`, one per
    /// controller in layout order.
    pub maximizing_unitaries: Vec<Unitary>,
    /// Branch decomposition at the reported optimum.
    pub branch_table: BranchTable,
    /// True when the outer sweep converged and every inner solve at the
    /// optimum met its stopping rule.
    pub converged: bool,
}

/// Minimum-over-pairs capability with the per-pair detail.
#[derive(Clone, Debug)]
pub struct MinPairReport {
    /// The minimum fidelity over all unordered pairs.
    pub value: f64,
    /// Lexicographically first pair attaining the minimum.
    pub pair: (String, String),
    /// Results for every pair, in lexicographic layout order.
    pub per_pair: Vec<CtelResult>,
}

/// Verdict against one separability class.
#[derive(Clone, Debug)]
pub struct KVerdict {
    pub k: usize,
    /// Exact threshold `T(d, N, k)`.
    pub threshold: Rational,
    /// Whether the state's minimum fidelity strictly exceeds the threshold,
    /// certifying that it is not `k`-separable.
    pub exceeds: bool,
}

/// Usefulness summary: the minimum pair fidelity compared against every
/// separability threshold.
#[derive(Clone, Debug)]
pub struct UsefulnessReport {
    pub d: usize,
    pub n: usize,
    pub min_fidelity: f64,
    pub argmin_pair: (String, String),
    /// One verdict per `k ∈ {2, …, N}`. Because `T` decreases in `k`, the
    /// positive verdicts form a suffix.
    pub verdicts: Vec<KVerdict>,
    /// Smallest `k` whose verdict is positive — the strongest certificate
    /// (`ρ` is not `k`-separable for this and every larger `k`).
    pub smallest_excluded_k: Option<usize>,
    /// Whether the minimum fidelity beats the no-entanglement bound
    /// `2/(d+1)`.
    pub beats_classical: bool,
    pub per_pair: Vec<CtelResult>,
}

struct PairContext<'a> {
    rho: &'a DensityMatrix,
    d: usize,
    controllers: Vec<String>,
    tol: Tolerances,
}

fn pair_context<'a>(
    rho: &'a DensityMatrix,
    i: &str,
    j: &str,
    tol: &Tolerances,
) -> Result<PairContext<'a>> {
    let layout = rho.layout();
    if layout.n() < 3 {
        return Err(TelecapError::InvalidParameter(format!(
            "controlled teleportation needs N ≥ 3 parties (got {})",
            layout.n()
        )));
    }
    let d = layout.dims()[0];
    if layout.dims().iter().any(|&dd| dd != d) {
        return Err(TelecapError::InvalidParameter(
            "controlled teleportation requires equal local dimensions".into(),
        ));
    }
    let pi = layout
        .position(i)
        .ok_or_else(|| TelecapError::InvalidLabel(i.to_string()))?;
    let pj = layout
        .position(j)
        .ok_or_else(|| TelecapError::InvalidLabel(j.to_string()))?;
    if pi == pj {
        return Err(TelecapError::InvalidParameter(format!(
            "pair labels must be distinct (got {i:?} twice)"
        )));
    }
    let controllers: Vec<String> = layout
        .labels()
        .iter()
        .enumerate()
        .filter(|(p, _)| *p != pi && *p != pj)
        .map(|(_, l)| l.clone())
        .collect();
    Ok(PairContext {
        rho,
        d,
        controllers,
        tol: tol.clone(),
    })
}

/// Extract the dominant pure component of a numerically pure state: the
/// column with the largest diagonal entry, normalized. For a state with
/// purity `≥ 1 − δ` the overlap error of the extracted ket is `O(δ)`.
fn dominant_pure_component(state: &DensityMatrix, tol: &Tolerances) -> Result<Ket> {
    let m = state.matrix();
    let dim = m.rows();
    let mut best = 0usize;
    let mut best_diag = f64::MIN;
    for c in 0..dim {
        let v = m.get(c, c).re;
        if v > best_diag {
            best_diag = v;
            best = c;
        }
    }
    let mut amps: Vec<Complex64> = (0..dim).map(|r| m.get(r, best)).collect();
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return Err(TelecapError::Numerical(
            "pure-component extraction on a zero column".into(),
        ));
    }
    let inv = Complex64::new(1.0 / norm, 0.0);
    for a in &mut amps {
        *a *= inv;
    }
    Ket::new_with(state.layout().clone(), amps, tol)
}

/// Fully entangled fraction of one conditional branch state, with the
/// cheapest applicable method: exact magic-basis eigenvalue for qubits,
/// Schmidt closed form for (numerically) pure states, manifold optimizer
/// otherwise.
fn branch_fraction(
    state: &DensityMatrix,
    d: usize,
    inner: &FefOptions,
    tol: &Tolerances,
) -> Result<(f64, bool)> {
    if d == 2 {
        let v = fef::magic_lambda_max(state.matrix())?;
        return Ok((v.clamp(0.0, 1.0), true));
    }
    if state.purity() >= 1.0 - 1e-12 {
        let ket = dominant_pure_component(state, tol)?;
        return Ok((fef::fef_pure(&ket)?.value, true));
    }
    let res = fef::fef_general(state, inner)?;
    Ok((res.value, res.converged))
}

/// Outcome-averaged branch fraction for one controller basis:
/// `Σ_J p_J · f(σ^{U,J})`. Degenerate branches (probability below the
/// floor) carry weight below the floor and are skipped.
fn evaluate_basis(
    ctx: &PairContext<'_>,
    unitaries: &[Unitary],
    inner: &FefOptions,
) -> Result<(f64, BranchTable, bool)> {
    let refs: Vec<&str> = ctx.controllers.iter().map(|s| s.as_str()).collect();
    let table = measure_product_basis_with(ctx.rho, &refs, unitaries, &ctx.tol)?;
    let mut acc = 0.0;
    let mut all_converged = true;
    for branch in &table.branches {
        if branch.degenerate {
            continue;
        }
        let (f, conv) = branch_fraction(&branch.state, ctx.d, inner, &ctx.tol)?;
        acc += branch.probability * f;
        all_converged &= conv;
    }
    Ok((acc.clamp(0.0, 1.0), table, all_converged))
}

/// Hermitian matrix from `d²` real angles: `d` diagonal entries followed by
/// (re, im) pairs for the strictly upper triangle in row-major order.
fn hermitian_from_angles(d: usize, theta: &[f64]) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(d, d);
    for a in 0..d {
        h.set(a, a, Complex64::new(theta[a], 0.0));
    }
    let mut off = d;
    for a in 0..d {
        for b in (a + 1)..d {
            let z = Complex64::new(theta[off], theta[off + 1]);
            h.set(a, b, z);
            h.set(b, a, z.conj());
            off += 2;
        }
    }
    h
}

fn unitary_from_angles(base: &ComplexMatrix, d: usize, theta: &[f64]) -> Result<Unitary> {
    let rot = expi_hermitian(&hermitian_from_angles(d, theta))?;
    Ok(Unitary::from_trusted(base.mul(&rot)))
}

/// Rotate a unitary's global phase so the first nonzero entry of its first
/// column is real positive, removing the flat gauge direction from reports.
fn gauge_fix(u: &Unitary) -> Unitary {
    let m = u.matrix();
    for r in 0..m.rows() {
        let z = m.get(r, 0);
        if z.norm() > 1e-12 {
            let phase = z / z.norm();
            return Unitary::from_trusted(m.scale(phase.conj()));
        }
    }
    u.clone()
}

struct OuterRun {
    units: Vec<Unitary>,
    value: f64,
    converged: bool,
}

/// Coordinate ascent over the exponential coordinates of every controller
/// unitary around the given bases. Per-coordinate steps adapt: doubling
/// while a direction keeps improving, halving when neither direction does.
fn coordinate_ascent(
    ctx: &PairContext<'_>,
    bases: &[ComplexMatrix],
    opts: &CtelOptions,
) -> Result<OuterRun> {
    let m = bases.len();
    let d = ctx.d;
    let dim_theta = d * d;
    let mut theta = vec![vec![0.0f64; dim_theta]; m];
    let mut units: Vec<Unitary> = bases
        .iter()
        .map(|b| Unitary::from_trusted(b.clone()))
        .collect();
    let (mut value, _, _) = evaluate_basis(ctx, &units, &opts.inner_search)?;
    let mut steps = vec![vec![0.3f64; dim_theta]; m];
    let mut converged = false;

    for _ in 0..opts.max_sweeps {
        let sweep_start = value;
        for t in 0..m {
            for c in 0..dim_theta {
                let old = theta[t][c];
                let mut accepted = false;
                for dir in [1.0f64, -1.0] {
                    let mut step = steps[t][c] * dir;
                    theta[t][c] = old + step;
                    let candidate = unitary_from_angles(&bases[t], d, &theta[t])?;
                    let saved = std::mem::replace(&mut units[t], candidate);
                    let (v, _, _) = evaluate_basis(ctx, &units, &opts.inner_search)?;
                    if v > value {
                        value = v;
                        accepted = true;
                        // Keep marching while the same direction pays off.
                        for _ in 0..6 {
                            step *= 2.0;
                            let fallback = theta[t][c];
                            theta[t][c] += step;
                            let farther = unitary_from_angles(&bases[t], d, &theta[t])?;
                            let prev = std::mem::replace(&mut units[t], farther);
                            let (v2, _, _) = evaluate_basis(ctx, &units, &opts.inner_search)?;
                            if v2 > value {
                                value = v2;
                            } else {
                                theta[t][c] = fallback;
                                units[t] = prev;
                                break;
                            }
                        }
                        steps[t][c] = (steps[t][c] * 2.0).min(2.0);
                        break;
                    }
                    theta[t][c] = old;
                    units[t] = saved;
                }
                if !accepted {
                    steps[t][c] = (steps[t][c] * 0.5).max(1e-6);
                }
            }
        }
        if value - sweep_start < opts.sweep_tol {
            converged = true;
            break;
        }
    }
    Ok(OuterRun {
        units,
        value,
        converged,
    })
}

fn optimize_pair(ctx: &PairContext<'_>, opts: &CtelOptions) -> Result<OuterRun> {
    let m = ctx.controllers.len();
    let d = ctx.d;
    let mut best: Option<OuterRun> = None;
    for r in 0..(2 + opts.restarts) {
        let bases: Vec<ComplexMatrix> = match r {
            0 => (0..m).map(|_| ComplexMatrix::identity(d)).collect(),
            1 => (0..m)
                .map(|_| Unitary::fourier_adjoint(d).matrix().clone())
                .collect(),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(r as u64);
                let mut v = Vec::with_capacity(m);
                for _ in 0..m {
                    v.push(haar_random_unitary(d, &mut rng)?.matrix().clone());
                }
                v
            }
        };
        let run = coordinate_ascent(ctx, &bases, opts)?;
        let replace = match &best {
            None => true,
            Some(b) => run.value > b.value,
        };
        if replace {
            best = Some(run);
        }
    }
    Ok(best.expect("at least the warm starts run"))
}

fn finalize(
    ctx: &PairContext<'_>,
    pair: (String, String),
    units: Vec<Unitary>,
    outer_converged: bool,
    opts: &CtelOptions,
) -> Result<CtelResult> {
    let units: Vec<Unitary> = units.iter().map(gauge_fix).collect();
    let (fraction, table, inner_converged) = evaluate_basis(ctx, &units, &opts.inner)?;
    let fidelity = fef::fidelity_from_fraction(fraction, ctx.d)?;
    Ok(CtelResult {
        pair,
        fraction,
        fidelity,
        maximizing_unitaries: units,
        branch_table: table,
        converged: outer_converged && inner_converged,
    })
}

/// Optimized controlled-teleportation fraction and fidelity for pair
/// `(i, j)`: outer coordinate-ascent over the controllers' product bases
/// with warm starts plus random restarts, inner per-branch fully entangled
/// fraction. Deterministic for a fixed seed; the result is a certified
/// lower bound.
pub fn ctel_fraction(
    rho: &DensityMatrix,
    i: &str,
    j: &str,
    options: &CtelOptions,
) -> Result<CtelResult> {
    let ctx = pair_context(rho, i, j, &options.tolerances)?;
    let run = optimize_pair(&ctx, options)?;
    finalize(
        &ctx,
        (i.to_string(), j.to_string()),
        run.units,
        run.converged,
        options,
    )
}

/// Branch-averaged fraction for one explicit controller basis (no outer
/// search). `unitaries` correspond to the controllers in layout order.
pub fn ctel_fraction_fixed_basis(
    rho: &DensityMatrix,
    i: &str,
    j: &str,
    unitaries: &[Unitary],
) -> Result<CtelResult> {
    ctel_fraction_fixed_basis_with(rho, i, j, unitaries, &CtelOptions::default())
}

/// [`ctel_fraction_fixed_basis`] with explicit options (inner solver and
/// tolerances; the outer search options are unused).
pub fn ctel_fraction_fixed_basis_with(
    rho: &DensityMatrix,
    i: &str,
    j: &str,
    unitaries: &[Unitary],
    options: &CtelOptions,
) -> Result<CtelResult> {
    let ctx = pair_context(rho, i, j, &options.tolerances)?;
    if unitaries.len() != ctx.controllers.len() {
        return Err(TelecapError::dim_mismatch(
            "one unitary per controller",
            ctx.controllers.len(),
            unitaries.len(),
        ));
    }
    for u in unitaries {
        if u.dim() != ctx.d {
            return Err(TelecapError::dim_mismatch(
                "controller unitary dimension",
                ctx.d,
                u.dim(),
            ));
        }
    }
    let (fraction, table, inner_converged) = evaluate_basis(&ctx, unitaries, &options.inner)?;
    let fidelity = fef::fidelity_from_fraction(fraction, ctx.d)?;
    Ok(CtelResult {
        pair: (i.to_string(), j.to_string()),
        fraction,
        fidelity,
        maximizing_unitaries: unitaries.to_vec(),
        branch_table: table,
        converged: inner_converged,
    })
}

/// Every unordered pair's capability and the minimum fidelity across them.
/// Pairs are enumerated lexicographically by layout position; the reported
/// argmin is the first pair attaining the minimum.
pub fn min_pair_fidelity(rho: &DensityMatrix, options: &CtelOptions) -> Result<MinPairReport> {
    let layout = rho.layout();
    if layout.n() < 3 {
        return Err(TelecapError::InvalidParameter(format!(
            "minimum pair capability needs N ≥ 3 parties (got {})",
            layout.n()
        )));
    }
    let labels = layout.labels().to_vec();
    let mut per_pair = Vec::new();
    let mut min_value = f64::INFINITY;
    let mut min_pair = (String::new(), String::new());
    for p in 0..labels.len() {
        for q in (p + 1)..labels.len() {
            let res = ctel_fraction(rho, &labels[p], &labels[q], options)?;
            if res.fidelity < min_value {
                min_value = res.fidelity;
                min_pair = res.pair.clone();
            }
            per_pair.push(res);
        }
    }
    Ok(MinPairReport {
        value: min_value,
        pair: min_pair,
        per_pair,
    })
}

/// Compare the minimum pair fidelity against every `k`-separability
/// threshold: a verdict `exceeds = true` at `k` certifies that the state is
/// not `k`-separable.
pub fn usefulness_report(rho: &DensityMatrix, options: &CtelOptions) -> Result<UsefulnessReport> {
    let layout = rho.layout();
    let n = layout.n();
    let d = layout.dims().first().copied().unwrap_or(0);
    let report = min_pair_fidelity(rho, options)?;
    let mut verdicts = Vec::with_capacity(n.saturating_sub(1));
    let mut smallest_excluded_k = None;
    for k in 2..=n {
        let threshold = threshold_t(d, n, k)?;
        let exceeds = report.value > threshold.to_f64().unwrap_or(f64::NAN);
        if exceeds && smallest_excluded_k.is_none() {
            smallest_excluded_k = Some(k);
        }
        verdicts.push(KVerdict {
            k,
            threshold,
            exceeds,
        });
    }
    let beats_classical = report.value > 2.0 / (d as f64 + 1.0);
    Ok(UsefulnessReport {
        d,
        n,
        min_fidelity: report.value,
        argmin_pair: report.pair,
        verdicts,
        smallest_excluded_k,
        beats_classical,
        per_pair: report.per_pair,
    })
}
