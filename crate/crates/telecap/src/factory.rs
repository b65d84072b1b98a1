//! Constructors for the named multiparty states used throughout the crate:
//! generalized GHZ kets, the digit-sum superpositions `|φ_{M,t}⟩`, the
//! extremal `k`-separable mixture that saturates the capability threshold,
//! isotropic GHZ states, and random `k`-separable samples for property
//! testing.

use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::TelecapError;
use crate::qstate::{ComplexMatrix, DensityMatrix, Ket, SystemLayout};
use crate::thresholds::{binomial, enumerate_partitions, stirling2, threshold_t, Partition, Rational};
use crate::tolerance::Tolerances;
use crate::Result;

/// Generalized GHZ ket `(1/√d) Σ_i |i⟩^⊗N` on `N` `d`-level systems.
pub fn ghz(n: usize, d: usize) -> Result<Ket> {
    ghz_with(n, d, &Tolerances::default())
}

/// [`ghz`] with explicit tolerances (for overriding the dimension guardrail).
pub fn ghz_with(n: usize, d: usize, tol: &Tolerances) -> Result<Ket> {
    if n < 2 {
        return Err(TelecapError::InvalidParameter(format!(
            "GHZ state needs N ≥ 2 (got {n})"
        )));
    }
    let layout = SystemLayout::uniform_with(n, d, tol)?;
    let dim = layout.total_dim();
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
    // |i⟩^⊗N has mixed-radix index i·(d^{N−1} + … + d + 1).
    let repunit: usize = (0..n).map(|p| d.pow(p as u32)).sum();
    for i in 0..d {
        amplitudes[i * repunit] = amp;
    }
    Ket::new_with(layout, amplitudes, tol)
}

/// Digit-sum superposition
/// `|φ_{M,t}⟩ = (1/√(d^{M−1})) Σ_{i_1+⋯+i_M ≡ t (mod d)} |i_1⋯i_M⟩`,
/// an equal-amplitude sum over the `d^{M−1}` digit strings whose digit sum
/// is `t` modulo `d`.
pub fn phi_mt(m: usize, t: usize, d: usize) -> Result<Ket> {
    phi_mt_with(m, t, d, &Tolerances::default())
}

/// [`phi_mt`] with explicit tolerances.
pub fn phi_mt_with(m: usize, t: usize, d: usize, tol: &Tolerances) -> Result<Ket> {
    if m < 1 {
        return Err(TelecapError::InvalidParameter(format!(
            "need M ≥ 1 (got {m})"
        )));
    }
    if d < 2 {
        return Err(TelecapError::InvalidParameter(format!(
            "need d ≥ 2 (got {d})"
        )));
    }
    if t >= d {
        return Err(TelecapError::InvalidParameter(format!(
            "digit-sum residue t must lie in 0..{d} (got {t})"
        )));
    }
    let layout = SystemLayout::uniform_with(m, d, tol)?;
    let dim = layout.total_dim();
    let amp = Complex64::new(1.0 / (dim as f64 / d as f64).sqrt(), 0.0);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
    for index in 0..dim {
        let digit_sum: usize = layout.digits_of(index).iter().sum();
        if digit_sum % d == t {
            amplitudes[index] = amp;
        }
    }
    Ket::new_with(layout, amplitudes, tol)
}

/// Parameters of the extremal `k`-separable state, carrying the exact
/// minimum-over-pairs fidelity it is constructed to attain.
#[derive(Clone, Debug)]
pub struct ExtremalStateSpec {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    /// The capability threshold `T(d, N, k)` this state saturates.
    pub expected_min_fidelity: Rational,
}

impl ExtremalStateSpec {
    pub fn new(d: usize, n: usize, k: usize) -> Result<Self> {
        let expected_min_fidelity = threshold_t(d, n, k)?;
        Ok(ExtremalStateSpec {
            d,
            n,
            k,
            expected_min_fidelity,
        })
    }
}

/// All `r`-element subsets of `{0, …, n−1}` in lexicographic order.
fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        // Advance to the next combination.
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Embed product factors into a joint layout: each group is a set of
/// ascending positions with a ket on exactly those subsystems; the groups
/// must partition the layout's positions.
fn embed_product(layout: &SystemLayout, groups: &[(Vec<usize>, Ket)]) -> Vec<Complex64> {
    let dim = layout.total_dim();
    let mut amplitudes = vec![Complex64::new(1.0, 0.0); dim];
    for index in 0..dim {
        let digits = layout.digits_of(index);
        let mut amp = Complex64::new(1.0, 0.0);
        for (positions, ket) in groups {
            let local: Vec<usize> = positions.iter().map(|&p| digits[p]).collect();
            amp *= ket.amplitudes()[ket.layout().index_of(&local)];
            if amp.norm_sqr() == 0.0 {
                break;
            }
        }
        amplitudes[index] = amp;
    }
    amplitudes
}

/// The symmetric `k`-separable mixture that saturates `T(d, N, k)`: a
/// uniform mixture over all `C(N, k−1)` ways to put `k−1` parties in `|0⟩`
/// and the remaining `N−k+1` parties in `|φ_{N−k+1, 0}⟩`.
pub fn extremal_ksep_state(spec: &ExtremalStateSpec) -> Result<DensityMatrix> {
    extremal_ksep_state_with(spec, &Tolerances::default())
}

/// [`extremal_ksep_state`] with explicit tolerances.
pub fn extremal_ksep_state_with(spec: &ExtremalStateSpec, tol: &Tolerances) -> Result<DensityMatrix> {
    let (d, n, k) = (spec.d, spec.n, spec.k);
    let layout = SystemLayout::uniform_with(n, d, tol)?;
    let phi = phi_mt_with(n - k + 1, 0, d, tol)?;
    let singles = combinations(n, k - 1);
    let weight = 1.0 / singles.len() as f64;
    let dim = layout.total_dim();
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for subset in &singles {
        let complement: Vec<usize> = (0..n).filter(|p| !subset.contains(p)).collect();
        let mut groups: Vec<(Vec<usize>, Ket)> = Vec::with_capacity(subset.len() + 1);
        for &p in subset {
            let zero = Ket::basis_state(SystemLayout::uniform_with(1, d, tol)?, &[0])?;
            groups.push((vec![p], zero));
        }
        groups.push((complement, phi.clone()));
        let amps = embed_product(&layout, &groups);
        for a in 0..dim {
            if amps[a].norm_sqr() == 0.0 {
                continue;
            }
            for b in 0..dim {
                let add = amps[a] * amps[b].conj() * weight;
                acc.set(a, b, acc.get(a, b) + add);
            }
        }
    }
    Ok(DensityMatrix::from_trusted(layout, acc))
}

/// Exact mixing probability above which the isotropic GHZ state is genuinely
/// multipartite entangled: `(2^{N−1} − 1)/(2^N − 1)`.
pub fn gme_probability_threshold(n: usize) -> Rational {
    use num_bigint::BigInt;
    let one = BigInt::from(1);
    let num = (BigInt::from(1) << (n - 1)) - &one;
    let den = (BigInt::from(1) << n) - &one;
    Rational::new(num, den)
}

/// Whether the isotropic GHZ state at mixing probability `p` is genuinely
/// multipartite entangled (criterion taken as ground truth, not re-derived
/// here). Exact: `p` is converted to its exact binary rational.
pub fn isotropic_ghz_is_gme(n: usize, p: f64) -> bool {
    match Rational::from_float(p) {
        Some(r) => r > gme_probability_threshold(n),
        None => false,
    }
}

/// Isotropic GHZ state `p·|GHZ_N⟩⟨GHZ_N| + (1−p)·I/2^N` on `N` qubits.
///
/// Returns the state plus a boundary flag that is true when `p` is exactly 0
/// or 1 (accepted, but outside the open interval the construction targets).
pub fn isotropic_ghz(n: usize, p: f64) -> Result<(DensityMatrix, bool)> {
    isotropic_ghz_with(n, p, &Tolerances::default())
}

/// [`isotropic_ghz`] with explicit tolerances.
pub fn isotropic_ghz_with(n: usize, p: f64, tol: &Tolerances) -> Result<(DensityMatrix, bool)> {
    if n < 3 {
        return Err(TelecapError::InvalidParameter(format!(
            "isotropic GHZ construction needs N ≥ 3 (got {n})"
        )));
    }
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(TelecapError::InvalidParameter(format!(
            "mixing probability must lie in [0, 1] (got {p})"
        )));
    }
    let boundary = p == 0.0 || p == 1.0;
    let ghz = ghz_with(n, 2, tol)?;
    let layout = ghz.layout().clone();
    let dim = layout.total_dim();
    let mut m = ComplexMatrix::identity(dim).scale(Complex64::new((1.0 - p) / dim as f64, 0.0));
    let amps = ghz.amplitudes();
    for a in 0..dim {
        if amps[a].norm_sqr() == 0.0 {
            continue;
        }
        for b in 0..dim {
            let add = amps[a] * amps[b].conj() * p;
            m.set(a, b, m.get(a, b) + add);
        }
    }
    Ok((DensityMatrix::from_trusted(layout, m), boundary))
}

fn haar_block_ket(positions: Vec<usize>, d: usize, rng: &mut ChaCha8Rng, tol: &Tolerances) -> Result<(Vec<usize>, Ket)> {
    let layout = SystemLayout::uniform_with(positions.len(), d, tol)?;
    let amplitudes = crate::qstate::haar_amplitudes(layout.total_dim(), rng);
    Ok((positions, Ket::new_with(layout, amplitudes, tol)?))
}

fn sep_pure_from_rng(
    partition: &Partition,
    d: usize,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
) -> Result<Ket> {
    let n = partition.n();
    let layout = SystemLayout::uniform_with(n, d, tol)?;
    let mut groups = Vec::with_capacity(partition.k());
    for block in partition.blocks() {
        groups.push(haar_block_ket(block.clone(), d, rng, tol)?);
    }
    let amplitudes = embed_product(&layout, &groups);
    Ket::new_with(layout, amplitudes, tol)
}

/// Random pure state factorizing across the given partition: independent
/// Haar-random kets, one per block, embedded at the block positions.
/// Deterministic for a fixed seed.
pub fn random_sep_pk_pure(partition: &Partition, d: usize, seed: u64) -> Result<Ket> {
    random_sep_pk_pure_with(partition, d, seed, &Tolerances::default())
}

/// [`random_sep_pk_pure`] with explicit tolerances.
pub fn random_sep_pk_pure_with(
    partition: &Partition,
    d: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Ket> {
    if d < 2 {
        return Err(TelecapError::InvalidParameter(format!(
            "need d ≥ 2 (got {d})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sep_pure_from_rng(partition, d, &mut rng, tol)
}

/// Random `k`-separable mixture: `terms` components, each a random pure
/// state factorizing across an independently and uniformly chosen `k`-block
/// partition, combined with flat-simplex (Dirichlet-uniform) weights.
///
/// Component `t` draws from RNG stream `t + 1` of the seed; weights and
/// partition choices use stream 0, so the construction is deterministic.
pub fn random_ksep_mixture(
    n: usize,
    k: usize,
    d: usize,
    terms: usize,
    seed: u64,
) -> Result<DensityMatrix> {
    random_ksep_mixture_with(n, k, d, terms, seed, &Tolerances::default())
}

/// [`random_ksep_mixture`] with explicit tolerances.
pub fn random_ksep_mixture_with(
    n: usize,
    k: usize,
    d: usize,
    terms: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<DensityMatrix> {
    if terms < 1 {
        return Err(TelecapError::InvalidParameter(format!(
            "need at least one mixture term (got {terms})"
        )));
    }
    let partition_count = stirling2(n, k)
        .to_u64()
        .ok_or_else(|| TelecapError::InvalidParameter("partition count overflow".into()))?;
    if partition_count == 0 {
        return Err(TelecapError::InvalidParameter(format!(
            "no partitions of {n} parties into {k} blocks"
        )));
    }
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(terms);
    let mut total = 0.0;
    for _ in 0..terms {
        let e: f64 = root.sample(Exp1);
        weights.push(e);
        total += e;
    }
    let mut components = Vec::with_capacity(terms);
    for (t, w) in weights.iter().enumerate() {
        let idx = root.gen_range(0..partition_count);
        let partition = enumerate_partitions(n, k)?
            .nth(idx as usize)
            .expect("index sampled below the partition count");
        let mut term_rng = ChaCha8Rng::seed_from_u64(seed);
        term_rng.set_stream(t as u64 + 1);
        let ket = sep_pure_from_rng(&partition, d, &mut term_rng, tol)?;
        components.push((w / total, ket.to_density()));
    }
    DensityMatrix::mixture(&components)
}

/// Number of size-`r` subsets used by [`extremal_ksep_state`]; exposed for
/// rank/shape assertions.
pub fn extremal_component_count(n: usize, k: usize) -> u64 {
    binomial(n, k - 1).to_u64().unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::linalg::eigh;
    use crate::qstate::partial_trace;
    use num_traits::One;

    #[test]
    fn ghz_qubit_amplitudes() {
        let g = ghz(3, 2).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        for (i, amp) in g.amplitudes().iter().enumerate() {
            let expect = if i == 0 || i == 7 { s } else { 0.0 };
            assert!((amp.re - expect).abs() < 1e-15 && amp.im == 0.0, "index {i}");
        }
    }

    #[test]
    fn ghz_qutrit_amplitudes() {
        let g = ghz(3, 3).unwrap();
        let s = 1.0 / 3.0f64.sqrt();
        for (i, amp) in g.amplitudes().iter().enumerate() {
            let expect = if i == 0 || i == 13 || i == 26 { s } else { 0.0 };
            assert!((amp.re - expect).abs() < 1e-15, "index {i}");
        }
    }

    #[test]
    fn ghz_pair_is_phi_plus() {
        let g = ghz(2, 2).unwrap();
        let phi = phi_mt(2, 0, 2).unwrap();
        let overlap = g.inner(&phi).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_mt_values() {
        let odd = phi_mt(2, 1, 2).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert!((odd.amplitudes()[1].re - s).abs() < 1e-15);
        assert!((odd.amplitudes()[2].re - s).abs() < 1e-15);
        assert!(odd.amplitudes()[0].norm() < 1e-15);
        assert!(odd.amplitudes()[3].norm() < 1e-15);

        // M=3, t=2, d=3: the nine digit strings with digit sum ≡ 2 (mod 3).
        let p = phi_mt(3, 2, 3).unwrap();
        let layout = p.layout().clone();
        let mut nonzero = 0;
        for index in 0..layout.total_dim() {
            let digits = layout.digits_of(index);
            let sum: usize = digits.iter().sum();
            let amp = p.amplitudes()[index];
            if sum % 3 == 2 {
                assert!((amp.re - 1.0 / 3.0).abs() < 1e-15, "digits {digits:?}");
                nonzero += 1;
            } else {
                assert!(amp.norm() < 1e-15, "digits {digits:?}");
            }
        }
        assert_eq!(nonzero, 9);
        // |222⟩ has digit sum 6 ≡ 0, so it does not appear.
        assert!(p.amplitudes()[26].norm() < 1e-15);
    }

    #[test]
    fn phi_mt_orthonormal_across_t() {
        for d in [2usize, 3] {
            for m in [2usize, 3] {
                let states: Vec<Ket> = (0..d).map(|t| phi_mt(m, t, d).unwrap()).collect();
                for (t1, a) in states.iter().enumerate() {
                    for (t2, b) in states.iter().enumerate() {
                        let expect = if t1 == t2 { 1.0 } else { 0.0 };
                        assert!(
                            (a.inner(b).norm() - expect).abs() < 1e-12,
                            "d={d}, m={m}, t1={t1}, t2={t2}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn phi_mt_rejects_bad_residue() {
        assert!(phi_mt(2, 2, 2).is_err());
        assert!(phi_mt(0, 0, 2).is_err());
    }

    #[test]
    fn extremal_minimal_case_entries() {
        let spec = ExtremalStateSpec::new(2, 3, 2).unwrap();
        assert_eq!(spec.expected_min_fidelity, crate::thresholds::rational(7, 9));
        let rho = extremal_ksep_state(&spec).unwrap();
        rho.validate(&Tolerances::default()).unwrap();
        // ⟨000|ρ|000⟩ = (1/3)·3·(1/2) = 1/2.
        assert!((rho.matrix().get(0, 0).re - 0.5).abs() < 1e-12);
        // Component |0⟩_1 ⊗ φ⁺_{23} links |000⟩ and |011⟩ with weight 1/6.
        assert!((rho.matrix().get(0, 3).re - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn extremal_fully_separable_endpoint() {
        let spec = ExtremalStateSpec::new(2, 4, 4).unwrap();
        let rho = extremal_ksep_state(&spec).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                let expect = if a == 0 && b == 0 { 1.0 } else { 0.0 };
                assert!((rho.matrix().get(a, b).re - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extremal_rank_and_symmetry() {
        let spec = ExtremalStateSpec::new(2, 4, 3).unwrap();
        let rho = extremal_ksep_state(&spec).unwrap();
        assert_eq!(extremal_component_count(4, 3), 6);
        let eig = eigh(rho.matrix()).unwrap();
        let rank = eig.values.iter().filter(|v| **v > 1e-12).count();
        assert!(rank <= 6, "rank {rank}");
        let trace: f64 = eig.values.iter().sum();
        assert!((trace - 1.0).abs() < 1e-10);

        // Permutation invariance: swapping any two parties leaves the matrix
        // unchanged after index remapping.
        let layout = rho.layout().clone();
        let dim = layout.total_dim();
        for (p, q) in [(0usize, 1usize), (1, 3), (0, 2)] {
            let remap: Vec<usize> = (0..dim)
                .map(|idx| {
                    let mut digits = layout.digits_of(idx);
                    digits.swap(p, q);
                    layout.index_of(&digits)
                })
                .collect();
            for a in 0..dim {
                for b in 0..dim {
                    let direct = rho.matrix().get(a, b);
                    let swapped = rho.matrix().get(remap[a], remap[b]);
                    assert!((direct - swapped).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn isotropic_ghz_spectrum_and_flags() {
        let (rho, boundary) = isotropic_ghz(3, 0.5).unwrap();
        assert!(!boundary);
        rho.validate(&Tolerances::default()).unwrap();
        let eig = eigh(rho.matrix()).unwrap();
        let small = (1.0 - 0.5) / 8.0;
        let large = 0.5 + small;
        for v in &eig.values[..7] {
            assert!((v - small).abs() < 1e-10, "got {v}");
        }
        assert!((eig.values[7] - large).abs() < 1e-10);
        assert!((rho.purity() - 0.34375).abs() < 1e-12);

        assert!(isotropic_ghz(3, 0.0).unwrap().1);
        assert!(isotropic_ghz(3, 1.0).unwrap().1);
        assert!(isotropic_ghz(3, -0.1).is_err());
        assert!(isotropic_ghz(3, 1.1).is_err());
        assert!(isotropic_ghz(2, 0.5).is_err());
    }

    #[test]
    fn gme_threshold_values() {
        assert_eq!(gme_probability_threshold(3), crate::thresholds::rational(3, 7));
        assert_eq!(gme_probability_threshold(4), crate::thresholds::rational(7, 15));
        assert!(isotropic_ghz_is_gme(3, 0.5));
        assert!(!isotropic_ghz_is_gme(3, 0.42));
        // The comparison is exact in the given float: 0.46 < 7/15 < 0.47.
        assert!(!isotropic_ghz_is_gme(4, 0.46));
        assert!(isotropic_ghz_is_gme(4, 0.47));
    }

    #[test]
    fn sep_pure_structure() {
        let partition = Partition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let ket = random_sep_pk_pure(&partition, 2, 11).unwrap();
        let again = random_sep_pk_pure(&partition, 2, 11).unwrap();
        assert_eq!(ket.amplitudes(), again.amplitudes());
        let rho = ket.to_density();
        // Marginal on the {A1,A2} block is pure.
        let block = partial_trace(&rho, &["A1", "A2"]).unwrap();
        assert!((block.purity() - 1.0).abs() < 1e-10);
        // Marginal on the cross-cut pair {A1,A3} is a product of marginals,
        // generically mixed on the A1 side.
        let cross = partial_trace(&rho, &["A1", "A3"]).unwrap();
        let a1 = partial_trace(&rho, &["A1"]).unwrap();
        let a3 = partial_trace(&rho, &["A3"]).unwrap();
        let product = a1.tensor(&a3).unwrap();
        assert!(cross.matrix().max_abs_diff(product.matrix()) < 1e-12);
        assert!(cross.purity() < 1.0 - 1e-6);
    }

    #[test]
    fn singleton_partition_gives_product() {
        let partition = Partition::new(3, vec![vec![0], vec![1], vec![2]]).unwrap();
        let ket = random_sep_pk_pure(&partition, 2, 5).unwrap();
        let rho = ket.to_density();
        for pair in [["A1", "A2"], ["A1", "A3"], ["A2", "A3"]] {
            let red = partial_trace(&rho, &pair).unwrap();
            let left = partial_trace(&rho, &pair[..1]).unwrap();
            let right = partial_trace(&rho, &pair[1..]).unwrap();
            assert!(red
                .matrix()
                .max_abs_diff(left.tensor(&right).unwrap().matrix())
                < 1e-12);
        }
    }

    #[test]
    fn ksep_mixture_valid_and_deterministic() {
        let rho = random_ksep_mixture(4, 2, 2, 5, 3).unwrap();
        rho.validate(&Tolerances::default()).unwrap();
        let again = random_ksep_mixture(4, 2, 2, 5, 3).unwrap();
        assert!(rho.matrix().max_abs_diff(again.matrix()) == 0.0);
        let other_seed = random_ksep_mixture(4, 2, 2, 5, 4).unwrap();
        assert!(rho.matrix().max_abs_diff(other_seed.matrix()) > 1e-6);
        assert!(random_ksep_mixture(3, 2, 2, 0, 0).is_err());
    }

    #[test]
    fn spec_requires_valid_threshold_parameters() {
        assert!(ExtremalStateSpec::new(2, 3, 1).is_err());
        assert!(ExtremalStateSpec::new(2, 3, 4).is_err());
        assert!(ExtremalStateSpec::new(1, 3, 2).is_err());
        let spec = ExtremalStateSpec::new(3, 3, 2).unwrap();
        assert_eq!(spec.expected_min_fidelity, crate::thresholds::rational(2, 3));
        assert!(Rational::one() > spec.expected_min_fidelity);
    }
}
