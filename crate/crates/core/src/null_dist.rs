//! Exact and asymptotic null distribution of the count matrix.
//!
//! Under the null the count matrix depends on the data only through the
//! group sizes, so its pmf and moments have closed forms. The pmf is kept
//! as exact integer labeling counts over a common denominator; probabilities
//! are produced by a single float division so that exhaustive-permutation
//! computations reproduce them bit for bit.

use alloc::format;
use alloc::vec::Vec;

use crate::counts::{pair_index, pair_order, CountMatrix};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Enumeration guards: support size explodes combinatorially past these.
pub const MAX_ENUM_GROUPS: usize = 4;
pub const MAX_ENUM_TOTAL: usize = 24;

/// Sizes of the K groups; the pooled total is even so a perfect matching
/// exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSizes {
    sizes: Vec<usize>,
}

impl GroupSizes {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidInput("need at least 2 groups".into()));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidInput("every group must be nonempty".into()));
        }
        let n: usize = sizes.iter().sum();
        if n % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "total sample size must be even, got {}",
                n
            )));
        }
        Ok(GroupSizes { sizes })
    }

    pub fn from_labels(labels: &crate::counts::LabelVector) -> Result<Self> {
        GroupSizes::new(labels.group_sizes().to_vec())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Number of matched pairs I = N/2.
    pub fn num_pairs(&self) -> usize {
        self.n() / 2
    }

    pub fn num_cross_pairs(&self) -> usize {
        self.k() * (self.k() - 1) / 2
    }
}

/// Null mean of the cross-count vector: E(a_st) = N_s N_t / (N - 1),
/// in canonical pair order.
pub fn null_mean(gs: &GroupSizes) -> Vec<f64> {
    let n = gs.n() as f64;
    pair_order(gs.k())
        .into_iter()
        .map(|(s, t)| (gs.sizes[s] * gs.sizes[t]) as f64 / (n - 1.0))
        .collect()
}

/// Null covariance matrix of the cross-count vector.
///
/// Three closed forms: the variance, the covariance of two counts sharing
/// one group, and the covariance of two counts over four distinct groups.
/// Requires N >= 4 for the (N - 3) denominators, and N >= 6 when K >= 3
/// (three nonempty groups cannot fit in an even N = 4).
pub fn null_covariance(gs: &GroupSizes) -> Result<Matrix> {
    let n_int = gs.n();
    if n_int <= 3 {
        return Err(Error::Precondition(format!(
            "covariance formulas need N >= 4, got N = {}",
            n_int
        )));
    }
    if n_int == 4 && gs.k() >= 3 {
        return Err(Error::Precondition(
            "N = 4 cannot hold 3 nonempty groups with even total; smallest supported N for K >= 3 is 6"
                .into(),
        ));
    }
    let n = n_int as f64;
    let k = gs.k();
    let pairs = pair_order(k);
    let q = pairs.len();
    let sz = |s: usize| gs.sizes[s] as f64;
    let mut cov = Matrix::zeros(q, q);
    for (a, &(s1, t1)) in pairs.iter().enumerate() {
        for (b, &(s2, t2)) in pairs.iter().enumerate() {
            if b < a {
                continue;
            }
            let v = if (s1, t1) == (s2, t2) {
                let m = sz(s1) * sz(t1) / (n - 1.0);
                sz(s1) * sz(t1) * (sz(s1) - 1.0) * (sz(t1) - 1.0) / ((n - 1.0) * (n - 3.0))
                    + m * (1.0 - m)
            } else {
                let shared = [s1, t1]
                    .iter()
                    .copied()
                    .find(|&x| x == s2 || x == t2);
                match shared {
                    Some(sh) => {
                        let o1 = if s1 == sh { t1 } else { s1 };
                        let o2 = if s2 == sh { t2 } else { s2 };
                        sz(sh) * (sz(sh) - 1.0) * sz(o1) * sz(o2) / ((n - 1.0) * (n - 3.0))
                            - sz(sh) * sz(sh) * sz(o1) * sz(o2) / ((n - 1.0) * (n - 1.0))
                    }
                    None => {
                        2.0 * sz(s1) * sz(t1) * sz(s2) * sz(t2)
                            / ((n - 1.0) * (n - 1.0) * (n - 3.0))
                    }
                }
            };
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Entrywise limit of Cov(vec A_N) / N as N grows with fixed group
/// proportions p.
pub fn null_covariance_limit(p: &[f64]) -> Matrix {
    let k = p.len();
    let pairs = pair_order(k);
    let q = pairs.len();
    let mut cov = Matrix::zeros(q, q);
    for (a, &(s1, t1)) in pairs.iter().enumerate() {
        for (b, &(s2, t2)) in pairs.iter().enumerate() {
            let v = if (s1, t1) == (s2, t2) {
                p[s1] * p[t1] * (2.0 * p[s1] * p[t1] - p[s1] - p[t1] + 1.0)
            } else {
                let shared = [s1, t1].iter().copied().find(|&x| x == s2 || x == t2);
                match shared {
                    Some(sh) => {
                        let o1 = if s1 == sh { t1 } else { s1 };
                        let o2 = if s2 == sh { t2 } else { s2 };
                        p[sh] * p[o1] * p[o2] * (2.0 * p[sh] - 1.0)
                    }
                    None => 2.0 * p[s1] * p[t1] * p[s2] * p[t2],
                }
            };
            cov[(a, b)] = v;
        }
    }
    cov
}

/// Mean vector and covariance of the vectorized cross counts under the null.
#[derive(Debug, Clone, PartialEq)]
pub struct NullMoments {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    k: usize,
}

impl NullMoments {
    pub fn new(mean: Vec<f64>, cov: Matrix, k: usize) -> Result<Self> {
        let q = k * (k - 1) / 2;
        if mean.len() != q || cov.rows() != q || cov.cols() != q {
            return Err(Error::InvalidInput(format!(
                "moments for K = {} need {} cross entries, got mean {} and cov {}x{}",
                k,
                q,
                mean.len(),
                cov.rows(),
                cov.cols()
            )));
        }
        Ok(NullMoments { mean, cov, k })
    }

    pub fn num_groups(&self) -> usize {
        self.k
    }

    /// Null variance of the single cross count (s, t).
    pub fn variance(&self, s: usize, t: usize) -> f64 {
        let i = pair_index(s, t, self.k);
        self.cov[(i, i)]
    }
}

pub fn null_moments(gs: &GroupSizes) -> Result<NullMoments> {
    Ok(NullMoments {
        mean: null_mean(gs),
        cov: null_covariance(gs)?,
        k: gs.k(),
    })
}

/// Mean and variance of the total cross count R under the null:
/// E R = G1/(N-1), Var R per the G1/G2 closed form.
pub fn mcm_moments(gs: &GroupSizes) -> Result<(f64, f64)> {
    let n_int = gs.n();
    if n_int <= 3 {
        return Err(Error::Precondition(format!(
            "variance formula needs N >= 4, got N = {}",
            n_int
        )));
    }
    let n = n_int as f64;
    let mut g1: u128 = 0;
    for (s, t) in pair_order(gs.k()) {
        g1 += (gs.sizes[s] as u128) * (gs.sizes[t] as u128);
    }
    let mut g2: u128 = 0;
    for &ns in &gs.sizes {
        let ns = ns as u128;
        let n_u = n_int as u128;
        g2 += ns * (n_u - ns) * (n_u - ns - 1);
    }
    let g1 = g1 as f64;
    let g2 = g2 as f64 / 2.0;
    let mean = g1 / (n - 1.0);
    let var = mean * (1.0 - mean) + (g1 * g1 - g1 - 2.0 * g2) / ((n - 1.0) * (n - 3.0));
    if var <= 0.0 {
        return Err(Error::Numeric(format!(
            "degenerate null variance {} for sizes {:?}",
            var,
            gs.sizes()
        )));
    }
    Ok((mean, var))
}

/// All symmetric nonnegative-integer K x K matrices b with
/// 2 b_ss + sum_{t != s} b_st = N_s. Guarded to K <= 4, N <= 24.
pub fn enumerate_support(gs: &GroupSizes) -> Result<Vec<CountMatrix>> {
    check_enum_guard(gs)?;
    let k = gs.k();
    let mut out = Vec::new();
    let mut residual: Vec<u64> = gs.sizes.iter().map(|&s| s as u64).collect();
    let mut current = CountMatrix::zeros(k);
    fill_group(0, 1, k, &mut residual, &mut current, &mut out);
    Ok(out)
}

fn check_enum_guard(gs: &GroupSizes) -> Result<()> {
    if gs.k() > MAX_ENUM_GROUPS || gs.n() > MAX_ENUM_TOTAL {
        return Err(Error::Unsupported(format!(
            "exact enumeration is limited to K <= {} and N <= {} (got K = {}, N = {}); \
             use permutation calibration instead",
            MAX_ENUM_GROUPS,
            MAX_ENUM_TOTAL,
            gs.k(),
            gs.n()
        )));
    }
    Ok(())
}

fn fill_group(
    s: usize,
    t: usize,
    k: usize,
    residual: &mut Vec<u64>,
    current: &mut CountMatrix,
    out: &mut Vec<CountMatrix>,
) {
    if s == k {
        out.push(current.clone());
        return;
    }
    if t == k {
        // close group s: leftover stubs pair up internally
        if residual[s] % 2 == 0 {
            let diag = residual[s] / 2;
            current.set(s, s, diag);
            let saved = residual[s];
            residual[s] = 0;
            fill_group(s + 1, s + 2, k, residual, current, out);
            residual[s] = saved;
            current.set(s, s, 0);
        }
        return;
    }
    let max_v = residual[s].min(residual[t]);
    for v in 0..=max_v {
        current.set(s, t, v);
        residual[s] -= v;
        residual[t] -= v;
        fill_group(s, t + 1, k, residual, current, out);
        residual[s] += v;
        residual[t] += v;
        current.set(s, t, 0);
    }
}

/// One support matrix with its exact labeling count and probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfEntry {
    pub matrix: CountMatrix,
    /// Number of label assignments (out of the multinomial total) that
    /// produce this count matrix over a fixed matching.
    pub weight: u128,
    pub probability: f64,
}

/// Exact null pmf of the count matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPmf {
    pub entries: Vec<PmfEntry>,
    /// Common denominator: the multinomial coefficient N! / prod N_s!.
    pub total_weight: u128,
}

impl ExactPmf {
    /// Sum of all probabilities; 1 up to float rounding.
    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }
}

/// Exact pmf via the closed form: each support matrix b has
/// 2^(sum cross) I! / prod b_st! labelings out of multinomial(N; N_1..N_K).
///
/// Weights are exact integers (they cannot overflow u128 within the
/// enumeration guards), so probabilities are single exact divisions.
pub fn exact_pmf(gs: &GroupSizes) -> Result<ExactPmf> {
    let support = enumerate_support(gs)?;
    let k = gs.k();
    let i_fact = factorial_u128(gs.num_pairs());
    let mut entries = Vec::with_capacity(support.len());
    let mut total: u128 = 0;
    for matrix in support {
        let mut weight = i_fact;
        for (s, t) in pair_order(k) {
            weight <<= matrix.get(s, t);
        }
        // dividing factorials sequentially stays exact: after each step the
        // value is a multinomial coefficient times a factorial
        for s in 0..k {
            for t in s..k {
                let f = factorial_u128(matrix.get(s, t) as usize);
                debug_assert_eq!(weight % f, 0);
                weight /= f;
            }
        }
        total += weight;
        entries.push(PmfEntry {
            matrix,
            weight,
            probability: 0.0,
        });
    }
    debug_assert_eq!(total, multinomial_u128(gs));
    for e in entries.iter_mut() {
        e.probability = e.weight as f64 / total as f64;
    }
    Ok(ExactPmf {
        entries,
        total_weight: total,
    })
}

fn factorial_u128(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn multinomial_u128(gs: &GroupSizes) -> u128 {
    let mut value: u128 = factorial_u128(gs.n());
    for &s in gs.sizes() {
        value /= factorial_u128(s);
    }
    value
}

/// Spectral diagnostic of a covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub condition: f64,
    pub ok: bool,
}

/// Smallest/largest eigenvalue and condition number of a symmetric
/// covariance; flags failure when the matrix is numerically singular or the
/// condition number exceeds `threshold`.
pub fn covariance_condition_check(cov: &Matrix, threshold: f64) -> Result<ConditionReport> {
    if !cov.is_symmetric(1e-9) {
        return Err(Error::InvalidInput(
            "condition check requires a symmetric matrix".into(),
        ));
    }
    let eig = cov.symmetric_eigenvalues()?;
    let min_eigenvalue = eig[0];
    let max_eigenvalue = eig[eig.len() - 1];
    let condition = if min_eigenvalue > 0.0 {
        max_eigenvalue / min_eigenvalue
    } else {
        f64::INFINITY
    };
    Ok(ConditionReport {
        min_eigenvalue,
        max_eigenvalue,
        condition,
        ok: min_eigenvalue > 0.0 && condition <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::pair_index;
    use alloc::vec;

    fn gs(sizes: &[usize]) -> GroupSizes {
        GroupSizes::new(sizes.to_vec()).unwrap()
    }

    #[test]
    fn group_sizes_validation() {
        assert!(GroupSizes::new(vec![2]).is_err());
        assert!(GroupSizes::new(vec![2, 0]).is_err());
        assert!(GroupSizes::new(vec![2, 1]).is_err()); // odd total
        assert!(GroupSizes::new(vec![2, 2]).is_ok());
    }

    #[test]
    fn null_mean_small_cases() {
        // (2,2): E(a12) = 4/3
        let m = null_mean(&gs(&[2, 2]));
        assert!((m[0] - 4.0 / 3.0).abs() < 1e-15);

        // (2,2,2): E(a12) = 4/5
        let m = null_mean(&gs(&[2, 2, 2]));
        assert!((m[0] - 0.8).abs() < 1e-15);

        // symmetry in (s,t)
        let m = null_mean(&gs(&[3, 5, 3, 5]));
        let k = 4;
        assert_eq!(
            m[pair_index(0, 1, k)],
            m[pair_index(2, 3, k)] // same size product
        );
    }

    #[test]
    fn null_covariance_small_cases() {
        // (2,2): Var(a12) = 8/9
        let c = null_covariance(&gs(&[2, 2])).unwrap();
        assert!((c[(0, 0)] - 8.0 / 9.0).abs() < 1e-15);

        // (2,2,2): Cov(a12, a13) = -8/75
        let c = null_covariance(&gs(&[2, 2, 2])).unwrap();
        let i12 = pair_index(0, 1, 3);
        let i13 = pair_index(0, 2, 3);
        assert!((c[(i12, i13)] + 8.0 / 75.0).abs() < 1e-15);

        // symmetric
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(c[(a, b)], c[(b, a)]);
            }
        }
    }

    #[test]
    fn null_covariance_guards() {
        assert!(matches!(
            null_covariance(&gs(&[1, 1])),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            null_covariance(&gs(&[2, 1, 1])),
            Err(Error::Precondition(_))
        ));
        assert!(null_covariance(&gs(&[2, 2, 2])).is_ok());
    }

    #[test]
    fn mcm_moments_small_cases() {
        let (mean, var) = mcm_moments(&gs(&[2, 2])).unwrap();
        assert!((mean - 4.0 / 3.0).abs() < 1e-15);
        assert!((var - 8.0 / 9.0).abs() < 1e-15);

        // (2,2,2): G1 = 12, G2 = 36, mean 2.4, var 0.64
        let (mean, var) = mcm_moments(&gs(&[2, 2, 2])).unwrap();
        assert!((mean - 2.4).abs() < 1e-12);
        assert!((var - 0.64).abs() < 1e-12);

        // invariance under permutation of groups
        let a = mcm_moments(&gs(&[4, 2, 6])).unwrap();
        let b = mcm_moments(&gs(&[6, 4, 2])).unwrap();
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn support_enumeration_small_cases() {
        // (2,2): two matrices, {b12 = 2} and {b11 = b22 = 1}
        let sup = enumerate_support(&gs(&[2, 2])).unwrap();
        assert_eq!(sup.len(), 2);
        assert!(sup
            .iter()
            .any(|m| m.get(0, 1) == 2 && m.get(0, 0) == 0 && m.get(1, 1) == 0));
        assert!(sup
            .iter()
            .any(|m| m.get(0, 1) == 0 && m.get(0, 0) == 1 && m.get(1, 1) == 1));

        // (1,1): forced single matrix
        let sup = enumerate_support(&gs(&[1, 1])).unwrap();
        assert_eq!(sup.len(), 1);
        assert_eq!(sup[0].get(0, 1), 1);

        // every enumerated matrix obeys the row constraint
        let sizes = [2usize, 2, 2];
        for m in enumerate_support(&gs(&sizes)).unwrap() {
            assert!(m.satisfies_row_constraint(&sizes));
        }

        // guard
        assert!(matches!(
            enumerate_support(&gs(&[20, 20])),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            enumerate_support(&gs(&[2, 2, 2, 2, 2])),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn exact_pmf_two_by_two() {
        // (2,2): P(a12 = 2) = 2/3, P(a12 = 0) = 1/3
        let pmf = exact_pmf(&gs(&[2, 2])).unwrap();
        assert_eq!(pmf.total_weight, 6); // multinomial(4; 2,2)
        for e in &pmf.entries {
            if e.matrix.get(0, 1) == 2 {
                assert_eq!(e.weight, 4);
                assert!((e.probability - 2.0 / 3.0).abs() < 1e-15);
            } else {
                assert_eq!(e.weight, 2);
                assert!((e.probability - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert!((pmf.total_probability() - 1.0).abs() < 1e-12);

        // (1,1): single outcome with probability 1
        let pmf = exact_pmf(&gs(&[1, 1])).unwrap();
        assert_eq!(pmf.entries.len(), 1);
        assert_eq!(pmf.entries[0].probability, 1.0);
    }

    #[test]
    fn exact_pmf_normalizes() {
        for sizes in [vec![2, 2], vec![4, 4], vec![2, 2, 2], vec![4, 2, 2], vec![3, 3]] {
            let pmf = exact_pmf(&gs(&sizes)).unwrap();
            assert!(
                (pmf.total_probability() - 1.0).abs() < 1e-12,
                "sizes {:?}",
                sizes
            );
            let sum: u128 = pmf.entries.iter().map(|e| e.weight).sum();
            assert_eq!(sum, pmf.total_weight);
        }
    }

    /// Oracle: tally count matrices over every distinct label assignment
    /// with the matching fixed at {(0,1), (2,3), ...}.
    fn labeling_oracle(sizes: &[usize]) -> Vec<(CountMatrix, u128)> {
        let mut labels = Vec::new();
        for (g, &s) in sizes.iter().enumerate() {
            labels.extend(core::iter::repeat(g).take(s));
        }
        let mut out: Vec<(CountMatrix, u128)> = Vec::new();
        let k = sizes.len();
        permute_multiset(&mut labels, 0, &mut |arrangement| {
            let mut cm = CountMatrix::zeros(k);
            for pair in arrangement.chunks(2) {
                let (s, t) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                cm.set(s, t, cm.get(s, t) + 1);
            }
            if let Some(entry) = out.iter_mut().find(|(m, _)| *m == cm) {
                entry.1 += 1;
            } else {
                out.push((cm, 1));
            }
        });
        out
    }

    /// Visits every distinct permutation of the multiset in `items`.
    fn permute_multiset(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
        if start == items.len() {
            visit(items);
            return;
        }
        let mut used = vec![];
        for i in start..items.len() {
            if used.contains(&items[i]) {
                continue;
            }
            used.push(items[i]);
            items.swap(start, i);
            permute_multiset(items, start + 1, visit);
            items.swap(start, i);
        }
    }

    #[test]
    fn exact_pmf_matches_exhaustive_labelings() {
        for sizes in [vec![2usize, 2], vec![2, 2, 2], vec![3, 3], vec![4, 2]] {
            let pmf = exact_pmf(&gs(&sizes)).unwrap();
            let oracle = labeling_oracle(&sizes);
            assert_eq!(pmf.entries.len(), oracle.len(), "sizes {:?}", sizes);
            for e in &pmf.entries {
                let (_, count) = oracle
                    .iter()
                    .find(|(m, _)| *m == e.matrix)
                    .expect("support matrix missing from oracle");
                assert_eq!(e.weight, *count, "sizes {:?}", sizes);
            }
        }
    }

    #[test]
    fn pmf_moments_match_closed_forms() {
        // mean and variance of a12 from the pmf agree with the formulas
        for sizes in [vec![2usize, 2], vec![4, 4], vec![2, 2, 2], vec![4, 2, 2]] {
            let g = gs(&sizes);
            let pmf = exact_pmf(&g).unwrap();
            let mean = null_mean(&g);
            let cov = null_covariance(&g).unwrap();
            let pairs = pair_order(g.k());
            for (idx, &(s, t)) in pairs.iter().enumerate() {
                let m: f64 = pmf
                    .entries
                    .iter()
                    .map(|e| e.probability * e.matrix.get(s, t) as f64)
                    .sum();
                assert!((m - mean[idx]).abs() < 1e-10, "mean {:?} ({},{})", sizes, s, t);
                for (jdx, &(u, v)) in pairs.iter().enumerate() {
                    let second: f64 = pmf
                        .entries
                        .iter()
                        .map(|e| {
                            e.probability * e.matrix.get(s, t) as f64 * e.matrix.get(u, v) as f64
                        })
                        .sum();
                    let c = second - mean[idx] * mean[jdx];
                    assert!(
                        (c - cov[(idx, jdx)]).abs() < 1e-10,
                        "cov {:?} ({},{})x({},{}): {} vs {}",
                        sizes,
                        s,
                        t,
                        u,
                        v,
                        c,
                        cov[(idx, jdx)]
                    );
                }
            }
        }
    }

    #[test]
    fn mcm_moments_match_pmf() {
        for sizes in [vec![2usize, 2], vec![2, 2, 2], vec![4, 2, 2]] {
            let g = gs(&sizes);
            let pmf = exact_pmf(&g).unwrap();
            let (mean, var) = mcm_moments(&g).unwrap();
            let m: f64 = pmf
                .entries
                .iter()
                .map(|e| e.probability * e.matrix.cross_edge_total() as f64)
                .sum();
            let v: f64 = pmf
                .entries
                .iter()
                .map(|e| {
                    let r = e.matrix.cross_edge_total() as f64;
                    e.probability * (r - m) * (r - m)
                })
                .sum();
            assert!((m - mean).abs() < 1e-10, "sizes {:?}", sizes);
            assert!((v - var).abs() < 1e-10, "sizes {:?}", sizes);
        }
    }

    #[test]
    fn covariance_limit_matches_large_n() {
        let p = [0.5, 0.3, 0.2];
        let big: Vec<usize> = p.iter().map(|x| (x * 1_000_000.0) as usize).collect();
        let g = gs(&big);
        let cov = null_covariance(&g).unwrap();
        let lim = null_covariance_limit(&p);
        let n = g.n() as f64;
        for a in 0..cov.rows() {
            for b in 0..cov.cols() {
                assert!(
                    (cov[(a, b)] / n - lim[(a, b)]).abs() < 1e-4,
                    "({}, {}): {} vs {}",
                    a,
                    b,
                    cov[(a, b)] / n,
                    lim[(a, b)]
                );
            }
        }
    }

    #[test]
    fn condition_check_reports() {
        let c = null_covariance(&gs(&[50, 50, 50])).unwrap();
        let rep = covariance_condition_check(&c, 1e12).unwrap();
        assert!(rep.min_eigenvalue > 0.0);
        assert!(rep.ok);

        let id = Matrix::identity(3);
        let rep = covariance_condition_check(&id, 1e12).unwrap();
        assert!((rep.condition - 1.0).abs() < 1e-10);

        let c = null_covariance(&gs(&[100, 100])).unwrap();
        assert_eq!(c.rows(), 1);
        assert!(c[(0, 0)] > 0.0);

        let bad = Matrix::from_vec(vec![1.0, 2.0, 0.0, 1.0], 2, 2).unwrap();
        assert!(covariance_condition_check(&bad, 1e12).is_err());
    }
}
