//! The K-sample tests: MCM, MMCM and MFRT statistics with asymptotic,
//! exact and permutation calibration, plus post-rejection pairwise class
//! selection.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::counts::{
    count_matrix, mst_count_matrix, mst_cross_total, pair_order, CountMatrix, CountVector,
    LabelVector,
};
use crate::error::{Error, Result};
use crate::geometry::{
    apply_odd_policy, min_nonbipartite_matching, minimum_spanning_tree, pairwise_distances,
    DistanceMatrix, Matching, Metric, PointCloud,
};
use crate::linalg::cholesky_solve;
use crate::null_dist::{
    covariance_condition_check, exact_pmf, mcm_moments, null_moments, GroupSizes, NullMoments,
};
use crate::rng::substream;
use crate::special::{chi_squared_sf, normal_cdf};

/// Which statistic the test is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Total cross count, rejecting when it is small.
    Mcm,
    /// Mahalanobis distance of the cross-count vector, rejecting when large.
    Mmcm,
    /// Between-group edge count of the minimum spanning tree,
    /// permutation-calibrated.
    Mfrt,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mcm => "mcm",
            Method::Mmcm => "mmcm",
            Method::Mfrt => "mfrt",
        }
    }
}

/// How the p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calibration {
    Asymptotic,
    Exact,
    Permutation,
}

impl Calibration {
    pub fn as_str(&self) -> &'static str {
        match self {
            Calibration::Asymptotic => "asymptotic",
            Calibration::Exact => "exact",
            Calibration::Permutation => "permutation",
        }
    }
}

/// Calibration request, carrying the replicate count for permutation tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationSpec {
    Asymptotic,
    Exact,
    Permutation { permutations: usize },
}

impl CalibrationSpec {
    pub fn tag(&self) -> Calibration {
        match self {
            CalibrationSpec::Asymptotic => Calibration::Asymptotic,
            CalibrationSpec::Exact => Calibration::Exact,
            CalibrationSpec::Permutation { .. } => Calibration::Permutation,
        }
    }
}

/// Outcome of a test run.
///
/// `statistic` is the standardized statistic for asymptotic calibration
/// (Q for MCM, S for MMCM) and the raw statistic otherwise (total cross
/// count for MCM, tree cross count for MFRT; MMCM always reports S).
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub calibration: Calibration,
    /// Chi-squared degrees of freedom, set for asymptotic MMCM.
    pub df: Option<usize>,
    pub count_matrix: CountMatrix,
    /// Null means of the cross counts (absent for MFRT).
    pub expected_counts: Option<Vec<f64>>,
    pub permutations: Option<usize>,
    pub seed: Option<u64>,
    /// Index deleted by the odd-size policy, if any.
    pub dropped_index: Option<usize>,
}

/// Mahalanobis distance of the cross counts from their null mean,
/// S = (v - mean)' Cov^{-1} (v - mean), via a symmetric linear solve.
pub fn mmcm_statistic(v: &CountVector, nm: &NullMoments) -> Result<f64> {
    if v.values().len() != nm.mean.len() {
        return Err(Error::InvalidInput(format!(
            "cross vector has length {} but moments have length {}",
            v.values().len(),
            nm.mean.len()
        )));
    }
    let centered: Vec<f64> = v
        .as_f64()
        .iter()
        .zip(nm.mean.iter())
        .map(|(a, b)| a - b)
        .collect();
    let solved = nm.cov.solve_spd(&centered).map_err(|e| {
        let diag = covariance_condition_check(&nm.cov, f64::INFINITY)
            .map(|r| {
                format!(
                    "min eigenvalue {:.3e}, condition {:.3e}",
                    r.min_eigenvalue, r.condition
                )
            })
            .unwrap_or_else(|_| String::from("condition diagnostic unavailable"));
        Error::Numeric(format!("covariance solve failed ({}); {}", e, diag))
    })?;
    Ok(centered.iter().zip(solved.iter()).map(|(a, b)| a * b).sum())
}

/// Standardized total cross count Q = (R - E R) / sqrt(Var R).
pub fn mcm_statistic(v: &CountVector, gs: &GroupSizes) -> Result<f64> {
    let (mean, var) = mcm_moments(gs)?;
    Ok((v.total() as f64 - mean) / var.sqrt())
}

/// Upper-tail chi-squared p-value with C(K,2) degrees of freedom.
pub fn asymptotic_pvalue_mmcm(s: f64, k: usize) -> f64 {
    chi_squared_sf(s, k * (k - 1) / 2)
}

/// Lower-tail standard normal p-value (small cross counts reject).
pub fn asymptotic_pvalue_mcm(q: f64) -> f64 {
    normal_cdf(q)
}

/// Statistic selector for exact p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactStatistic {
    /// P(S >= observed) under the exact null pmf.
    Mmcm,
    /// P(R <= observed): lower tail of the raw total cross count.
    McmRaw,
}

/// Exact p-value from the enumerated null pmf. The probability is an exact
/// integer count divided once by the multinomial total, so an exhaustive
/// permutation enumeration reproduces it bit for bit.
pub fn exact_pvalue(gs: &GroupSizes, observed: f64, statistic: ExactStatistic) -> Result<f64> {
    let pmf = exact_pmf(gs)?;
    let extreme_weight: u128 = match statistic {
        ExactStatistic::McmRaw => pmf
            .entries
            .iter()
            .filter(|e| (e.matrix.cross_edge_total() as f64) <= observed)
            .map(|e| e.weight)
            .sum(),
        ExactStatistic::Mmcm => {
            let nm = null_moments(gs)?;
            let mut acc: u128 = 0;
            for e in &pmf.entries {
                let s = mmcm_statistic(&e.matrix.cross_vector(), &nm)?;
                if s >= observed {
                    acc += e.weight;
                }
            }
            acc
        }
    };
    Ok(extreme_weight as f64 / pmf.total_weight as f64)
}

/// The geometric graph a permutation test keeps fixed while labels shuffle.
enum FixedGraph {
    Matching(Matching),
    Tree(crate::geometry::EdgeList),
}

/// Permutation test over the fixed geometric graph of the pooled sample.
///
/// The graph is computed once; labels are shuffled B times with one RNG
/// substream per replicate, and the p-value uses the add-one convention
/// p = (1 + #{at least as extreme}) / (B + 1).
pub fn permutation_test(
    d: &DistanceMatrix,
    labels: &LabelVector,
    method: Method,
    permutations: usize,
    seed: u64,
) -> Result<TestResult> {
    if permutations < 1 {
        return Err(Error::InvalidInput(
            "permutation count must be at least 1".into(),
        ));
    }
    if labels.n() != d.n() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} points",
            labels.n(),
            d.n()
        )));
    }
    if labels.num_groups() < 2 {
        return Err(Error::InvalidInput("need at least 2 groups".into()));
    }

    let graph = match method {
        Method::Mcm | Method::Mmcm => FixedGraph::Matching(min_nonbipartite_matching(d)?),
        Method::Mfrt => FixedGraph::Tree(minimum_spanning_tree(d)),
    };

    // MMCM needs the null moments; factor the covariance once.
    let mmcm_engine = if method == Method::Mmcm {
        let gs = GroupSizes::from_labels(labels)?;
        let nm = null_moments(&gs)?;
        let chol = nm.cov.cholesky().map_err(|e| {
            Error::Numeric(format!("null covariance is not positive definite: {}", e))
        })?;
        Some((nm, chol))
    } else {
        None
    };

    let statistic_of = |labs: &LabelVector| -> f64 {
        match (&graph, &mmcm_engine) {
            (FixedGraph::Matching(m), None) => {
                // raw cross count
                m.pairs()
                    .iter()
                    .filter(|&&(i, j)| labs.labels()[i] != labs.labels()[j])
                    .count() as f64
            }
            (FixedGraph::Matching(m), Some((nm, chol))) => {
                let cm = count_matrix(m, labs).expect("matching covers the labels");
                let v = cm.cross_vector();
                let centered: Vec<f64> = v
                    .as_f64()
                    .iter()
                    .zip(nm.mean.iter())
                    .map(|(a, b)| a - b)
                    .collect();
                let solved = cholesky_solve(chol, &centered);
                centered.iter().zip(solved.iter()).map(|(a, b)| a * b).sum()
            }
            (FixedGraph::Tree(t), _) => mst_cross_total(t, labs) as f64,
        }
    };

    let observed = statistic_of(labels);
    let mut working: Vec<usize> = labels.labels().to_vec();
    let mut extreme = 0usize;
    for rep in 0..permutations {
        let mut rng = substream(seed, rep as u64);
        working.shuffle(&mut rng);
        let permuted = LabelVector::new(working.clone()).expect("shuffle preserves groups");
        let stat = statistic_of(&permuted);
        let is_extreme = match method {
            Method::Mcm | Method::Mfrt => stat <= observed,
            Method::Mmcm => stat >= observed,
        };
        if is_extreme {
            extreme += 1;
        }
    }
    let p_value = (1.0 + extreme as f64) / (permutations as f64 + 1.0);

    let (count_matrix, expected_counts) = match &graph {
        FixedGraph::Matching(m) => {
            let cm = count_matrix(m, labels)?;
            let gs = GroupSizes::from_labels(labels)?;
            (cm, Some(crate::null_dist::null_mean(&gs)))
        }
        FixedGraph::Tree(t) => (mst_count_matrix(t, labels), None),
    };

    Ok(TestResult {
        statistic: observed,
        p_value,
        method,
        calibration: Calibration::Permutation,
        df: None,
        count_matrix,
        expected_counts,
        permutations: Some(permutations),
        seed: Some(seed),
        dropped_index: None,
    })
}

/// Raw points (with a metric) or a precomputed distance matrix.
pub enum DataInput<'a> {
    Points(&'a PointCloud, Metric),
    Distances(&'a DistanceMatrix),
}

/// End-to-end test runner: builds distances, resolves an odd pooled size by
/// the deletion policy when a matching is required, computes the statistic
/// and calibrates it.
pub fn run_test(
    data: DataInput<'_>,
    labels: &LabelVector,
    method: Method,
    calibration: CalibrationSpec,
    seed: u64,
) -> Result<TestResult> {
    let distances = match data {
        DataInput::Points(cloud, metric) => {
            if cloud.n() != labels.n() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} points",
                    labels.n(),
                    cloud.n()
                )));
            }
            pairwise_distances(cloud, metric)
        }
        DataInput::Distances(d) => {
            if d.n() != labels.n() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} points",
                    labels.n(),
                    d.n()
                )));
            }
            d.clone()
        }
    };

    // the matching methods need an even pooled size; the MST does not
    let needs_matching = matches!(method, Method::Mcm | Method::Mmcm);
    let (distances, labels_owned, dropped_index) = if needs_matching && labels.n() % 2 == 1 {
        let idx = apply_odd_policy(labels, seed).expect("n is odd");
        (
            distances.without_index(idx),
            labels.without_index(idx)?,
            Some(idx),
        )
    } else {
        (distances, labels.clone(), None)
    };
    let labels = &labels_owned;

    let mut result = match calibration {
        CalibrationSpec::Permutation { permutations } => {
            permutation_test(&distances, labels, method, permutations, seed)?
        }
        CalibrationSpec::Asymptotic | CalibrationSpec::Exact => {
            if method == Method::Mfrt {
                return Err(Error::Unsupported(
                    "the MFRT statistic is not distribution-free; use permutation calibration"
                        .into(),
                ));
            }
            let gs = GroupSizes::from_labels(labels)?;
            let matching = min_nonbipartite_matching(&distances)?;
            let cm = count_matrix(&matching, labels)?;
            let v = cm.cross_vector();
            let mean = crate::null_dist::null_mean(&gs);
            match (method, calibration) {
                (Method::Mcm, CalibrationSpec::Asymptotic) => {
                    let q = mcm_statistic(&v, &gs)?;
                    TestResult {
                        statistic: q,
                        p_value: asymptotic_pvalue_mcm(q),
                        method,
                        calibration: Calibration::Asymptotic,
                        df: None,
                        count_matrix: cm,
                        expected_counts: Some(mean),
                        permutations: None,
                        seed: Some(seed),
                        dropped_index: None,
                    }
                }
                (Method::Mmcm, CalibrationSpec::Asymptotic) => {
                    let nm = null_moments(&gs)?;
                    let s = mmcm_statistic(&v, &nm)?;
                    let k = gs.k();
                    TestResult {
                        statistic: s,
                        p_value: asymptotic_pvalue_mmcm(s, k),
                        method,
                        calibration: Calibration::Asymptotic,
                        df: Some(k * (k - 1) / 2),
                        count_matrix: cm,
                        expected_counts: Some(mean),
                        permutations: None,
                        seed: Some(seed),
                        dropped_index: None,
                    }
                }
                (Method::Mcm, CalibrationSpec::Exact) => {
                    let r = v.total() as f64;
                    TestResult {
                        statistic: r,
                        p_value: exact_pvalue(&gs, r, ExactStatistic::McmRaw)?,
                        method,
                        calibration: Calibration::Exact,
                        df: None,
                        count_matrix: cm,
                        expected_counts: Some(mean),
                        permutations: None,
                        seed: Some(seed),
                        dropped_index: None,
                    }
                }
                (Method::Mmcm, CalibrationSpec::Exact) => {
                    let nm = null_moments(&gs)?;
                    let s = mmcm_statistic(&v, &nm)?;
                    TestResult {
                        statistic: s,
                        p_value: exact_pvalue(&gs, s, ExactStatistic::Mmcm)?,
                        method,
                        calibration: Calibration::Exact,
                        df: None,
                        count_matrix: cm,
                        expected_counts: Some(mean),
                        permutations: None,
                        seed: Some(seed),
                        dropped_index: None,
                    }
                }
                _ => unreachable!(),
            }
        }
    };
    result.dropped_index = dropped_index;
    Ok(result)
}

/// Multiplicity correction for the pairwise table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    Bh,
    Bonferroni,
}

/// Benjamini-Hochberg step-up adjustment: order-preserving, capped at 1.
pub fn bh_adjust(p: &[f64]) -> Result<Vec<f64>> {
    validate_probabilities(p)?;
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).expect("p-values are finite"));
    let mut adjusted = alloc::vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let idx = order[rank];
        let candidate = (p[idx] * m as f64 / (rank + 1) as f64).min(1.0);
        running = running.min(candidate);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

/// Bonferroni adjustment: p * m capped at 1.
pub fn bonferroni_adjust(p: &[f64]) -> Result<Vec<f64>> {
    validate_probabilities(p)?;
    let m = p.len() as f64;
    Ok(p.iter().map(|&x| (x * m).min(1.0)).collect())
}

fn validate_probabilities(p: &[f64]) -> Result<()> {
    for (i, &x) in p.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidInput(format!(
                "p-value {} at position {} is outside [0, 1]",
                x, i
            )));
        }
    }
    Ok(())
}

/// One pairwise comparison (s, t): standardized count, raw and adjusted
/// lower-tail p-values, and the rejection flag at level alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseRow {
    pub s: usize,
    pub t: usize,
    pub observed: u64,
    pub expected: f64,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub reject: bool,
}

/// Pairwise comparison table with the post-rejection class selection.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTable {
    pub rows: Vec<PairwiseRow>,
    /// The group common to every rejected pair, when that group is unique.
    pub selected_class: Option<usize>,
}

/// Standardizes each cross count, adjusts the lower-tail p-values for
/// multiplicity, and identifies the class shared by all rejected pairs.
pub fn pairwise_class_selection(
    v: &CountVector,
    nm: &NullMoments,
    correction: Correction,
    alpha: f64,
) -> Result<PairwiseTable> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must be in (0, 1), got {}",
            alpha
        )));
    }
    let k = nm.num_groups();
    if v.values().len() != nm.mean.len() {
        return Err(Error::InvalidInput(
            "cross vector and moments disagree on the number of groups".into(),
        ));
    }
    let pairs = pair_order(k);
    let mut raw = Vec::with_capacity(pairs.len());
    let mut zs = Vec::with_capacity(pairs.len());
    for (idx, &(s, t)) in pairs.iter().enumerate() {
        let var = nm.variance(s, t);
        if var <= 0.0 {
            return Err(Error::Numeric(format!(
                "null variance of pair ({}, {}) is not positive",
                s, t
            )));
        }
        let z = (v.values()[idx] as f64 - nm.mean[idx]) / var.sqrt();
        zs.push(z);
        raw.push(normal_cdf(z));
    }
    let adjusted = match correction {
        Correction::Bh => bh_adjust(&raw)?,
        Correction::Bonferroni => bonferroni_adjust(&raw)?,
    };
    let mut rows = Vec::with_capacity(pairs.len());
    for (idx, &(s, t)) in pairs.iter().enumerate() {
        rows.push(PairwiseRow {
            s,
            t,
            observed: v.values()[idx],
            expected: nm.mean[idx],
            z: zs[idx],
            p_raw: raw[idx],
            p_adjusted: adjusted[idx],
            reject: adjusted[idx] <= alpha,
        });
    }
    let mut common: Option<Vec<usize>> = None;
    for row in rows.iter().filter(|r| r.reject) {
        let pair = alloc::vec![row.s, row.t];
        common = Some(match common {
            None => pair,
            Some(prev) => prev.into_iter().filter(|g| pair.contains(g)).collect(),
        });
    }
    let selected_class = match common {
        Some(c) if c.len() == 1 => Some(c[0]),
        _ => None,
    };
    Ok(PairwiseTable {
        rows,
        selected_class,
    })
}
