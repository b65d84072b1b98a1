//! Exact rational capability thresholds and the set-partition combinatorics
//! behind them.
//!
//! For states that are mixtures of pure states factorizing into `k` blocks
//! (`k`-separable states), the minimum over pairs of the controlled
//! teleportation fidelity is bounded by
//!
//! ```text
//! T(d, N, k) = 2/(d+1) + (d−1)/(d+1) · (N−k+1)(N−k) / (N(N−1))
//! ```
//!
//! and, when every entangled cluster spans at most `m` parties, by the
//! refinement
//!
//! ```text
//! T_e(d, N, m) = 1 − 2(d−1)·m(N−m) / ((d+1)·N(N−1)).
//! ```
//!
//! Both are computed in exact rational arithmetic; floating-point only
//! appears at the serialization boundary.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::TelecapError;
use crate::Result;

/// Exact rational number (reduced form, positive denominator).
pub type Rational = BigRational;

/// Convenience constructor for small rationals.
pub fn rational(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A partition of the parties `{0, …, N−1}` into `k` nonempty blocks.
///
/// Canonical form: members sorted within each block, blocks ordered by
/// smallest member. Parties are stored as 0-based positions; label rendering
/// is a presentation concern of the caller.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    n: usize,
}

impl Partition {
    /// Build from blocks, validating disjointness and coverage of `0..n`.
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut count = 0usize;
        for b in &mut blocks {
            if b.is_empty() {
                return Err(TelecapError::InvalidParameter("empty partition block".into()));
            }
            b.sort_unstable();
            for &m in b.iter() {
                if m >= n {
                    return Err(TelecapError::InvalidParameter(format!(
                        "party {m} out of range for N = {n}"
                    )));
                }
                if seen[m] {
                    return Err(TelecapError::InvalidParameter(format!(
                        "party {m} appears in two blocks"
                    )));
                }
                seen[m] = true;
                count += 1;
            }
        }
        if count != n {
            return Err(TelecapError::InvalidParameter(
                "partition blocks must cover every party".into(),
            ));
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Partition { blocks, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of blocks `k`.
    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Whether parties `i` and `j` share a block.
    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.blocks.iter().any(|b| b.contains(&i) && b.contains(&j))
    }

    /// Number of unordered pairs lying inside blocks, `Σ_t C(|P_t|, 2)`.
    pub fn intra_block_pairs(&self) -> u64 {
        self.blocks
            .iter()
            .map(|b| (b.len() as u64) * (b.len() as u64 - 1) / 2)
            .sum()
    }

    /// Render blocks with the given labels, e.g. `{A1 A3}{A2}`.
    pub fn render(&self, labels: &[String]) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push('{');
            for (i, &m) in b.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(&labels[m]);
            }
            out.push('}');
        }
        out
    }
}

/// Largest number of parties the partition enumeration accepts; Bell-number
/// growth makes larger inputs impractical by design.
pub const MAX_ENUMERATION_N: usize = 12;

/// Upper bound `T(d, N, k)` on the minimum-over-pairs controlled
/// teleportation fidelity of a `k`-separable `N`-qudit state.
pub fn threshold_t(d: usize, n: usize, k: usize) -> Result<Rational> {
    if d < 2 {
        return Err(TelecapError::InvalidParameter(format!("need d ≥ 2 (got {d})")));
    }
    if n < 3 {
        return Err(TelecapError::InvalidParameter(format!("need N ≥ 3 (got {n})")));
    }
    if k < 2 || k > n {
        return Err(TelecapError::InvalidParameter(format!(
            "need 2 ≤ k ≤ N (got k = {k}, N = {n})"
        )));
    }
    let d = BigInt::from(d);
    let n = BigInt::from(n);
    let k = BigInt::from(k);
    let one = BigInt::one();
    let two = BigInt::from(2);
    let classical = BigRational::new(two, &d + &one);
    let cluster = BigRational::new(
        (&n - &k + &one) * (&n - &k),
        &n * (&n - &one),
    );
    let weight = BigRational::new(&d - &one, &d + &one);
    Ok(classical + weight * cluster)
}

/// Refined bound `T_e(d, N, m)` for biseparable states whose entangled
/// clusters span at most `m` parties; defined for `⌈N/2⌉ ≤ m ≤ N−1`.
pub fn threshold_te(d: usize, n: usize, m: usize) -> Result<Rational> {
    if d < 2 {
        return Err(TelecapError::InvalidParameter(format!("need d ≥ 2 (got {d})")));
    }
    if n < 3 {
        return Err(TelecapError::InvalidParameter(format!("need N ≥ 3 (got {n})")));
    }
    let m_min = n.div_ceil(2);
    if m < m_min || m > n - 1 {
        return Err(TelecapError::InvalidParameter(format!(
            "need ⌈N/2⌉ ≤ m ≤ N−1 (got m = {m}, N = {n})"
        )));
    }
    let d = BigInt::from(d);
    let n_big = BigInt::from(n);
    let m_big = BigInt::from(m);
    let one = BigInt::one();
    let two = BigInt::from(2);
    let penalty = BigRational::new(
        two * (&d - &one) * &m_big * (&n_big - &m_big),
        (&d + &one) * &n_big * (&n_big - &one),
    );
    Ok(BigRational::one() - penalty)
}

/// Large-`N` limit of `T_e` along `m = γN`: `1 − 2(d−1)γ(1−γ)/(d+1)`.
pub fn threshold_te_limit(d: usize, gamma: &Rational) -> Result<Rational> {
    if d < 2 {
        return Err(TelecapError::InvalidParameter(format!("need d ≥ 2 (got {d})")));
    }
    let half = rational(1, 2);
    let one = BigRational::one();
    if gamma < &half || gamma > &one {
        return Err(TelecapError::InvalidParameter(format!(
            "need 1/2 ≤ γ ≤ 1 (got {gamma})"
        )));
    }
    let d = BigInt::from(d);
    let two = BigInt::from(2);
    let weight = BigRational::new(two * (&d - BigInt::one()), &d + BigInt::one());
    Ok(&one - weight * gamma * (&one - gamma))
}

/// Iterator over all partitions of `{0, …, n−1}` into exactly `k` blocks,
/// in restricted-growth-string order; yields `S(n, k)` partitions.
pub fn enumerate_partitions(n: usize, k: usize) -> Result<PartitionIter> {
    if n == 0 || n > MAX_ENUMERATION_N {
        return Err(TelecapError::InvalidParameter(format!(
            "partition enumeration supports 1 ≤ N ≤ {MAX_ENUMERATION_N} (got {n})"
        )));
    }
    if k == 0 || k > n {
        return Err(TelecapError::InvalidParameter(format!(
            "need 1 ≤ k ≤ N (got k = {k}, N = {n})"
        )));
    }
    Ok(PartitionIter {
        n,
        k,
        rgs: Vec::new(),
        done: false,
    })
}

/// Lazy restricted-growth-string enumerator (see [`enumerate_partitions`]).
pub struct PartitionIter {
    n: usize,
    k: usize,
    rgs: Vec<usize>,
    done: bool,
}

impl PartitionIter {
    /// Smallest valid RGS suffix from `from` onward, given the running
    /// maximum; returns false when the prefix cannot reach exactly k blocks.
    fn fill_minimal_suffix(&mut self, from: usize) -> bool {
        for i in from..self.n {
            let max_before = if i == 0 {
                0
            } else {
                self.rgs[..i].iter().copied().max().unwrap_or(0) + 1
            };
            // Blocks still needed beyond those opened so far.
            let opened = max_before;
            let remaining = self.n - i;
            let needed = self.k.saturating_sub(opened);
            if needed > remaining {
                return false;
            }
            // Open new blocks as late as possible: assign 0 unless forced.
            self.rgs[i] = if needed == remaining && needed > 0 {
                opened // forced to open a new block now
            } else {
                0
            };
            if i == 0 {
                self.rgs[i] = 0;
            }
        }
        true
    }

    fn to_partition(&self) -> Partition {
        let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); self.k];
        for (party, &b) in self.rgs.iter().enumerate() {
            blocks[b].push(party);
        }
        Partition::new(self.n, blocks).expect("RGS yields a valid partition")
    }
}

impl Iterator for PartitionIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        if self.rgs.is_empty() {
            self.rgs = vec![0; self.n];
            if !self.fill_minimal_suffix(0) {
                self.done = true;
                return None;
            }
            return Some(self.to_partition());
        }
        // Advance: find the rightmost position that can be incremented while
        // a valid suffix still exists.
        let mut i = self.n;
        loop {
            if i == 1 {
                self.done = true;
                return None;
            }
            i -= 1;
            let max_before = self.rgs[..i].iter().copied().max().unwrap_or(0);
            let cap = (max_before + 1).min(self.k - 1);
            if self.rgs[i] < cap {
                self.rgs[i] += 1;
                if self.fill_minimal_suffix(i + 1) {
                    return Some(self.to_partition());
                }
                // Suffix infeasible: keep incrementing at this position.
                continue;
            }
        }
    }
}

/// Stirling number of the second kind `S(n, k)` via the standard recurrence.
pub fn stirling2(n: usize, k: usize) -> num_bigint::BigUint {
    use num_bigint::BigUint;
    if k > n {
        return BigUint::zero();
    }
    if n == 0 {
        return BigUint::one(); // S(0,0) = 1
    }
    if k == 0 {
        return BigUint::zero();
    }
    let mut row: Vec<BigUint> = vec![BigUint::zero(); k + 1];
    row[0] = BigUint::one(); // S(0,0)
    for ni in 1..=n {
        // Work right-to-left so row[j−1] is still S(ni−1, j−1).
        for j in (1..=k.min(ni)).rev() {
            let t = &row[j] * BigUint::from(j) + &row[j - 1];
            row[j] = t;
        }
        row[0] = BigUint::zero();
    }
    row[k].clone()
}

/// Binomial coefficient with exact integer arithmetic.
pub fn binomial(n: usize, k: usize) -> num_bigint::BigUint {
    use num_bigint::BigUint;
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= BigUint::from(n - i);
        den *= BigUint::from(i + 1);
    }
    num / den
}

/// Brute-force maximum of `Σ_t C(|P_t|, 2)` over all `k`-block partitions,
/// with a maximizing witness. Equals `C(N−k+1, 2)`, attained by one block of
/// size `N−k+1` plus singletons; the exhaustive search is the point (it is
/// the verification, not the formula).
pub fn max_intra_block_pairs(n: usize, k: usize) -> Result<(u64, Partition)> {
    if k < 2 || k > n {
        return Err(TelecapError::InvalidParameter(format!(
            "need 2 ≤ k ≤ N (got k = {k}, N = {n})"
        )));
    }
    let mut best: Option<(u64, Partition)> = None;
    for p in enumerate_partitions(n, k)? {
        let v = p.intra_block_pairs();
        match &best {
            Some((bv, _)) if *bv >= v => {}
            _ => best = Some((v, p)),
        }
    }
    Ok(best.expect("at least one partition exists"))
}

/// Exact upper bound on the pair fraction `f_ij` of a mixture of
/// block-factorized pure states:
/// `1/d + (d−1)/d · Σ α over partitions keeping i and j in one block`.
pub fn fij_upper_bound_for_mixture(
    weights: &[(Partition, Rational)],
    i: usize,
    j: usize,
    d: usize,
) -> Result<Rational> {
    if d < 2 {
        return Err(TelecapError::InvalidParameter(format!("need d ≥ 2 (got {d})")));
    }
    let mut total = BigRational::zero();
    let mut joined = BigRational::zero();
    for (p, alpha) in weights {
        if alpha.is_negative() {
            return Err(TelecapError::InvalidParameter(
                "mixture weights must be nonnegative".into(),
            ));
        }
        if i >= p.n() || j >= p.n() {
            return Err(TelecapError::InvalidParameter(format!(
                "pair ({i}, {j}) out of range for N = {}",
                p.n()
            )));
        }
        total += alpha;
        if p.same_block(i, j) {
            joined += alpha;
        }
    }
    if total != BigRational::one() {
        return Err(TelecapError::InvalidParameter(
            "mixture weights must sum to exactly 1".into(),
        ));
    }
    let d = BigInt::from(d);
    let inv_d = BigRational::new(BigInt::one(), d.clone());
    let weight = BigRational::new(&d - BigInt::one(), d);
    Ok(inv_d + weight * joined)
}

/// Exact form of the fraction-to-fidelity map `F = (d·f + 1)/(d + 1)`.
pub fn fidelity_from_fraction_exact(f: &Rational, d: usize) -> Rational {
    let d = BigInt::from(d);
    (BigRational::from(d.clone()) * f + BigRational::one())
        / BigRational::from(&d + BigInt::one())
}

/// Row of a threshold table: exact value plus its float image.
#[derive(Clone, Debug)]
pub struct TableRow {
    pub d: usize,
    pub n: usize,
    /// `k` for `T` tables, `m` for `T_e` tables.
    pub k_or_m: usize,
    pub value: Rational,
}

/// Cluster-size selector for `T_e` tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MSpec {
    /// `m = ⌈N/2⌉` (equals `N/2` on the even grids the tables use).
    Half,
    /// `m = ` nearest integer to `2N/3` (ties up).
    TwoThirds,
    /// `m = N − 1`.
    NMinusOne,
}

impl MSpec {
    pub fn m_for(self, n: usize) -> usize {
        match self {
            MSpec::Half => n.div_ceil(2),
            MSpec::TwoThirds => (2 * n + 1) / 3,
            MSpec::NMinusOne => n - 1,
        }
    }
}

/// `T(d, N, k)` rows for `N` in the given range; `k = None` means all
/// `2 ≤ k ≤ N`, in (N, k) lexicographic order.
pub fn table_t(d: usize, n_min: usize, n_max: usize, k: Option<usize>) -> Result<Vec<TableRow>> {
    if n_min > n_max {
        return Err(TelecapError::InvalidParameter(format!(
            "empty N range ({n_min}..{n_max})"
        )));
    }
    let mut rows = Vec::new();
    for n in n_min..=n_max {
        let ks: Vec<usize> = match k {
            Some(k) => vec![k],
            None => (2..=n).collect(),
        };
        for k in ks {
            rows.push(TableRow {
                d,
                n,
                k_or_m: k,
                value: threshold_t(d, n, k)?,
            });
        }
    }
    Ok(rows)
}

/// `T_e(d, N, m)` rows with `m` chosen by the selector for each `N`.
pub fn table_te(d: usize, n_min: usize, n_max: usize, spec: MSpec) -> Result<Vec<TableRow>> {
    if n_min > n_max {
        return Err(TelecapError::InvalidParameter(format!(
            "empty N range ({n_min}..{n_max})"
        )));
    }
    let mut rows = Vec::new();
    for n in n_min..=n_max {
        let m = spec.m_for(n);
        rows.push(TableRow {
            d,
            n,
            k_or_m: m,
            value: threshold_te(d, n, m)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn classical_threshold_is_two_thirds_for_all_n() {
        for n in 3..=12 {
            assert_eq!(threshold_t(2, n, n).unwrap(), rational(2, 3));
        }
    }

    #[test]
    fn known_threshold_values() {
        assert_eq!(threshold_t(2, 3, 2).unwrap(), rational(7, 9));
        assert_eq!(threshold_t(2, 7, 2).unwrap(), rational(19, 21));
        assert_eq!(threshold_t(3, 3, 2).unwrap(), rational(2, 3));
        // T(d, N, 2) = 1 − 2(d−1)/(N(d+1)).
        for d in 2..=4usize {
            for n in 3..=9usize {
                let expect = BigRational::one()
                    - rational(2 * (d as i64 - 1), (n * (d + 1)) as i64);
                assert_eq!(threshold_t(d, n, 2).unwrap(), expect);
            }
        }
    }

    #[test]
    fn te_matches_t_at_m_equals_n_minus_1() {
        for n in 3..=12 {
            assert_eq!(
                threshold_te(2, n, n - 1).unwrap(),
                threshold_t(2, n, 2).unwrap()
            );
        }
    }

    #[test]
    fn te_known_values_and_caps() {
        assert_eq!(threshold_te(2, 6, 4).unwrap(), rational(37, 45));
        assert_eq!(threshold_te(2, 6, 3).unwrap(), rational(4, 5));
        let cap_half = rational(5, 6);
        for t in 1..=5 {
            let n = 6 * t;
            assert!(threshold_te(2, n, n / 2).unwrap() <= cap_half);
        }
        assert_eq!(threshold_te_limit(2, &rational(1, 2)).unwrap(), rational(5, 6));
        assert_eq!(threshold_te_limit(2, &rational(2, 3)).unwrap(), rational(23, 27));
        assert_eq!(threshold_te_limit(2, &BigRational::one()).unwrap(), BigRational::one());
    }

    #[test]
    fn te_rejects_m_below_half() {
        assert!(threshold_te(2, 6, 2).is_err());
        assert!(threshold_te(2, 7, 3).is_err()); // ⌈7/2⌉ = 4
        assert!(threshold_te(2, 6, 6).is_err());
    }

    #[test]
    fn partition_counts_match_stirling_numbers() {
        assert_eq!(enumerate_partitions(3, 2).unwrap().count(), 3);
        assert_eq!(enumerate_partitions(4, 2).unwrap().count(), 7);
        assert_eq!(enumerate_partitions(5, 3).unwrap().count(), 25);
        for n in 1..=9usize {
            for k in 1..=n {
                let count = enumerate_partitions(n, k).unwrap().count();
                assert_eq!(
                    num_bigint::BigUint::from(count),
                    stirling2(n, k),
                    "count mismatch at N={n}, k={k}"
                );
            }
        }
    }

    #[test]
    fn partitions_are_canonical_and_distinct() {
        let all: Vec<Partition> = enumerate_partitions(5, 3).unwrap().collect();
        for p in &all {
            assert_eq!(p.k(), 3);
            for b in p.blocks() {
                assert!(b.windows(2).all(|w| w[0] < w[1]));
            }
            for w in p.blocks().windows(2) {
                assert!(w[0][0] < w[1][0]);
            }
        }
        for (i, p) in all.iter().enumerate() {
            for q in &all[i + 1..] {
                assert_ne!(p, q);
            }
        }
    }

    #[test]
    fn small_partition_enumeration_is_exhaustive() {
        let got: Vec<Partition> = enumerate_partitions(3, 2).unwrap().collect();
        let expect = [
            Partition::new(3, vec![vec![0, 1], vec![2]]).unwrap(),
            Partition::new(3, vec![vec![0, 2], vec![1]]).unwrap(),
            Partition::new(3, vec![vec![0], vec![1, 2]]).unwrap(),
        ];
        for e in &expect {
            assert!(got.contains(e), "missing {e:?}");
        }
    }

    #[test]
    fn max_intra_pairs_matches_binomial() {
        let (v, witness) = max_intra_block_pairs(4, 2).unwrap();
        assert_eq!(v, 3);
        let sizes: Vec<usize> = witness.blocks().iter().map(|b| b.len()).collect();
        assert!(sizes.contains(&3));
        assert_eq!(max_intra_block_pairs(5, 2).unwrap().0, 6);
        assert_eq!(max_intra_block_pairs(6, 6).unwrap().0, 0);
        for n in 2..=8usize {
            for k in 2..=n {
                let (v, w) = max_intra_block_pairs(n, k).unwrap();
                let expect = binomial(n - k + 1, 2).to_u64().unwrap();
                assert_eq!(v, expect, "N={n}, k={k}");
                assert_eq!(w.k(), k);
            }
        }
    }

    #[test]
    fn pair_bound_examples() {
        let n = 3;
        // Single partition keeping the pair together saturates at 1.
        let together = Partition::new(n, vec![vec![0, 1], vec![2]]).unwrap();
        let w = vec![(together, BigRational::one())];
        assert_eq!(
            fij_upper_bound_for_mixture(&w, 0, 1, 2).unwrap(),
            BigRational::one()
        );
        // Separating partition gives 1/d.
        let apart = Partition::new(n, vec![vec![0, 2], vec![1]]).unwrap();
        let w = vec![(apart, BigRational::one())];
        assert_eq!(
            fij_upper_bound_for_mixture(&w, 0, 1, 2).unwrap(),
            rational(1, 2)
        );
        // Uniform over the three bipartitions: 1/2 + (1/2)(1/3) = 2/3.
        let thirds: Vec<(Partition, Rational)> = enumerate_partitions(3, 2)
            .unwrap()
            .map(|p| (p, rational(1, 3)))
            .collect();
        assert_eq!(
            fij_upper_bound_for_mixture(&thirds, 0, 1, 2).unwrap(),
            rational(2, 3)
        );
    }

    #[test]
    fn monotonicity_in_k_and_nesting() {
        for d in [2usize, 3] {
            for n in 3..=10usize {
                for k in 3..=n {
                    let hi = threshold_t(d, n, k - 1).unwrap();
                    let lo = threshold_t(d, n, k).unwrap();
                    assert!(lo < hi, "T must strictly decrease in k (d={d}, N={n}, k={k})");
                }
            }
        }
    }

    #[test]
    fn te_increases_with_n_at_fixed_fraction() {
        // γ = 1/2 along even N; T_e grows towards the 5/6 cap.
        let mut prev: Option<Rational> = None;
        for t in 2..=15usize {
            let n = 2 * t;
            let v = threshold_te(2, n, t).unwrap();
            if let Some(p) = prev {
                assert!(v > p);
            }
            prev = Some(v);
        }
    }

    #[test]
    fn exact_fidelity_map() {
        assert_eq!(
            fidelity_from_fraction_exact(&rational(2, 3), 2),
            rational(7, 9)
        );
        assert_eq!(
            fidelity_from_fraction_exact(&rational(5, 9), 3),
            rational(2, 3)
        );
    }

    #[test]
    fn table_shapes() {
        let rows = table_t(2, 3, 7, None).unwrap();
        assert_eq!(rows.len(), 20); // Σ_{N=3..7} (N−1)
        assert_eq!(rows[0].n, 3);
        assert_eq!(rows[0].k_or_m, 2);
        assert_eq!(rows[0].value, rational(7, 9));
        let te = table_te(2, 6, 30, MSpec::Half).unwrap();
        assert!(te.iter().all(|r| r.value <= rational(5, 6)));
    }
}
