//! Point clouds, distance matrices, optimal matchings and spanning trees.

mod blossom;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::counts::LabelVector;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Stream tag for the odd-size deletion draw.
const ODD_POLICY_STREAM: u64 = u64::MAX;

/// N observations in d dimensions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointCloud {
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n < 2 || d < 1 {
            return Err(Error::InvalidInput(format!(
                "point cloud needs at least 2 points and 1 dimension, got {}x{}",
                n, d
            )));
        }
        if data.len() != n * d {
            return Err(Error::InvalidInput(format!(
                "data length {} does not match {}x{}",
                data.len(),
                n,
                d
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(PointCloud { data, n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Cloud with row `index` removed (odd-size policy).
    pub fn without_row(&self, index: usize) -> PointCloud {
        let mut data = Vec::with_capacity((self.n - 1) * self.d);
        for i in 0..self.n {
            if i != index {
                data.extend_from_slice(self.row(i));
            }
        }
        PointCloud {
            data,
            n: self.n - 1,
            d: self.d,
        }
    }

    /// Per-feature standardization to zero mean and unit standard deviation.
    /// Constant features are centered only.
    pub fn standardized(&self) -> PointCloud {
        let mut mean = vec![0.0; self.d];
        for i in 0..self.n {
            for (m, v) in mean.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= self.n as f64;
        }
        let mut var = vec![0.0; self.d];
        for i in 0..self.n {
            for j in 0..self.d {
                let c = self.row(i)[j] - mean[j];
                var[j] += c * c;
            }
        }
        let sd: Vec<f64> = var
            .iter()
            .map(|v| {
                let s = (v / (self.n as f64 - 1.0).max(1.0)).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.n {
            for j in 0..self.d {
                data.push((self.row(i)[j] - mean[j]) / sd[j]);
            }
        }
        PointCloud {
            data,
            n: self.n,
            d: self.d,
        }
    }
}

/// Metric used to build the distance matrix from coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Manhattan,
}

/// Symmetric nonnegative dissimilarity matrix; the only geometric input the
/// tests ever see.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Vec<f64>,
    n: usize,
}

impl DistanceMatrix {
    /// Validates a raw square matrix: finite, nonnegative, zero diagonal and
    /// symmetric within `sym_tol` (asymmetries inside the tolerance are
    /// averaged away).
    pub fn from_raw(values: Vec<f64>, n: usize, sym_tol: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("distance matrix needs at least 2 points".into()));
        }
        if values.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "matrix length {} does not match {}x{}",
                values.len(),
                n,
                n
            )));
        }
        let mut out = values;
        for i in 0..n {
            for j in 0..n {
                let v = out[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "distance at ({}, {}) is {}, expected a finite nonnegative value",
                        i, j, v
                    )));
                }
            }
        }
        for i in 0..n {
            if out[i * n + i] > sym_tol {
                return Err(Error::InvalidInput(format!(
                    "diagonal entry at ({}, {}) is {}, expected 0",
                    i, i, out[i * n + i]
                )));
            }
            out[i * n + i] = 0.0;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let a = out[i * n + j];
                let b = out[j * n + i];
                if (a - b).abs() > sym_tol * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidInput(format!(
                        "asymmetry at ({}, {}): {} vs {}",
                        i, j, a, b
                    )));
                }
                let v = 0.5 * (a + b);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        Ok(DistanceMatrix { values: out, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Matrix with row and column `index` removed.
    pub fn without_index(&self, index: usize) -> DistanceMatrix {
        let m = self.n - 1;
        let mut values = Vec::with_capacity(m * m);
        for i in 0..self.n {
            if i == index {
                continue;
            }
            for j in 0..self.n {
                if j != index {
                    values.push(self.get(i, j));
                }
            }
        }
        DistanceMatrix { values, n: m }
    }
}

/// All pairwise distances of a cloud under the chosen metric.
pub fn pairwise_distances(cloud: &PointCloud, metric: Metric) -> DistanceMatrix {
    let n = cloud.n();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let a = cloud.row(i);
            let b = cloud.row(j);
            let d = match metric {
                Metric::Euclidean => {
                    let mut acc = 0.0;
                    for (x, y) in a.iter().zip(b) {
                        let c = x - y;
                        acc += c * c;
                    }
                    acc.sqrt()
                }
                Metric::Manhattan => {
                    let mut acc = 0.0;
                    for (x, y) in a.iter().zip(b) {
                        acc += (x - y).abs();
                    }
                    acc
                }
            };
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix { values, n }
}

/// A perfect pairing of the indices 0..N: N/2 disjoint pairs covering every
/// index, stored as (low, high) pairs in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
    weight: f64,
}

impl Matching {
    fn from_pairs(mut pairs: Vec<(usize, usize)>, d: &DistanceMatrix) -> Matching {
        for p in pairs.iter_mut() {
            if p.0 > p.1 {
                *p = (p.1, p.0);
            }
        }
        pairs.sort_unstable();
        let weight = matching_weight(d, &pairs);
        Matching { pairs, weight }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }
}

/// Sum of distances over a pair list, in canonical (sorted) order so equal
/// pairings always produce bit-identical weights.
pub fn matching_weight(d: &DistanceMatrix, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| d.get(i, j)).sum()
}

/// Exact minimum-weight perfect matching of an even number of points.
///
/// Distances are converted to exact integers (all f64 values are dyadic
/// rationals, so a common power-of-two rescaling is lossless) and the
/// matching is solved by the primal-dual blossom algorithm in integer
/// arithmetic. Ties between optimal matchings are broken deterministically
/// by the algorithm's canonical run followed by lexicographic ordering.
pub fn min_nonbipartite_matching(d: &DistanceMatrix) -> Result<Matching> {
    let n = d.n();
    if n % 2 != 0 {
        return Err(Error::Precondition(format!(
            "matching requires an even number of points, got {}",
            n
        )));
    }
    let scaled = scale_to_integers(d)?;
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            // negate: maximum-weight max-cardinality matching of the negated
            // distances is the minimum-weight perfect matching
            edges.push((i as u32, j as u32, -scaled[i * n + j]));
        }
    }
    let mate = blossom::max_weight_matching(n, &edges, true);
    let mut pairs = Vec::with_capacity(n / 2);
    for (v, &m) in mate.iter().enumerate() {
        match m {
            Some(u) if v < u => pairs.push((v, u)),
            Some(_) => {}
            None => {
                return Err(Error::Numeric(format!(
                    "matching left vertex {} unmatched",
                    v
                )))
            }
        }
    }
    Ok(Matching::from_pairs(pairs, d))
}

/// Exact minimum by exhaustive recursion over all (N-1)!! pairings.
/// Test oracle for the blossom solver; refuses N > 12.
pub fn brute_force_matching(d: &DistanceMatrix) -> Result<Matching> {
    let n = d.n();
    if n % 2 != 0 {
        return Err(Error::Precondition(format!(
            "matching requires an even number of points, got {}",
            n
        )));
    }
    if n > 12 {
        return Err(Error::Unsupported(format!(
            "brute force enumerates (N-1)!! matchings; N = {} is past the N <= 12 guard",
            n
        )));
    }

    fn recurse(
        d: &DistanceMatrix,
        free: &mut Vec<usize>,
        current: &mut Vec<(usize, usize)>,
        acc: f64,
        best: &mut (f64, Vec<(usize, usize)>),
    ) {
        if free.is_empty() {
            if acc < best.0 {
                *best = (acc, current.clone());
            }
            return;
        }
        let first = free[0];
        for k in 1..free.len() {
            let partner = free[k];
            let mut rest: Vec<usize> = free
                .iter()
                .copied()
                .filter(|&v| v != first && v != partner)
                .collect();
            current.push((first, partner));
            recurse(d, &mut rest, current, acc + d.get(first, partner), best);
            current.pop();
        }
    }

    let mut free: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, Vec::new());
    recurse(d, &mut free, &mut Vec::new(), 0.0, &mut best);
    Ok(Matching::from_pairs(best.1, d))
}

/// Exact dyadic rescaling of the distances to integers, doubled so the
/// blossom dual variables stay integral.
fn scale_to_integers(d: &DistanceMatrix) -> Result<Vec<i128>> {
    let n = d.n();
    // decompose each value as mantissa * 2^exp with the mantissa odd
    let mut parts = Vec::with_capacity(n * n);
    let mut min_exp = i64::MAX;
    for &v in d.values() {
        if v == 0.0 {
            parts.push((0u64, 0i64));
            continue;
        }
        let bits = v.to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let (mut mant, mut exp) = if raw_exp == 0 {
            (bits & ((1u64 << 52) - 1), -1074i64)
        } else {
            ((bits & ((1u64 << 52) - 1)) | (1u64 << 52), raw_exp - 1075)
        };
        let tz = mant.trailing_zeros();
        mant >>= tz;
        exp += tz as i64;
        min_exp = min_exp.min(exp);
        parts.push((mant, exp));
    }
    if min_exp == i64::MAX {
        // all distances zero (all points coincide)
        return Ok(vec![0i128; n * n]);
    }
    let mut out = Vec::with_capacity(n * n);
    for &(mant, exp) in &parts {
        if mant == 0 {
            out.push(0i128);
            continue;
        }
        let shift = exp - min_exp + 1; // +1 doubles every weight
        if shift + 64 - mant.leading_zeros() as i64 > 120 {
            return Err(Error::Numeric(
                "distance matrix spans more than ~2^60 in relative magnitude; \
                 rescale the data before matching"
                    .into(),
            ));
        }
        out.push((mant as i128) << shift);
    }
    Ok(out)
}

/// Spanning tree: N-1 edges of minimum total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    edges: Vec<(usize, usize)>,
    total_weight: f64,
}

impl EdgeList {
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }
}

/// Minimum spanning tree of the complete graph on the distance matrix
/// (Prim's algorithm, O(N^2) on the dense input).
pub fn minimum_spanning_tree(d: &DistanceMatrix) -> EdgeList {
    let n = d.n();
    let mut in_tree = vec![false; n];
    let mut best_dist = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    in_tree[0] = true;
    for j in 1..n {
        best_dist[j] = d.get(0, j);
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut v = usize::MAX;
        let mut dist = f64::INFINITY;
        for j in 0..n {
            if !in_tree[j] && best_dist[j] < dist {
                dist = best_dist[j];
                v = j;
            }
        }
        let u = best_from[v];
        edges.push((u.min(v), u.max(v)));
        in_tree[v] = true;
        for j in 0..n {
            if !in_tree[j] && d.get(v, j) < best_dist[j] {
                best_dist[j] = d.get(v, j);
                best_from[j] = v;
            }
        }
    }
    edges.sort_unstable();
    let total_weight = edges.iter().map(|&(i, j)| d.get(i, j)).sum();
    EdgeList {
        edges,
        total_weight,
    }
}

/// Index to delete when the pooled size is odd: drawn uniformly from the
/// largest group (ties broken by the lowest group id), deterministic given
/// the seed. Returns `None` when N is already even.
pub fn apply_odd_policy(labels: &LabelVector, seed: u64) -> Option<usize> {
    if labels.n() % 2 == 0 {
        return None;
    }
    let sizes = labels.group_sizes();
    let mut group = 0;
    for (g, &sz) in sizes.iter().enumerate() {
        if sz > sizes[group] {
            group = g;
        }
    }
    let members: Vec<usize> = (0..labels.n())
        .filter(|&i| labels.labels()[i] == group)
        .collect();
    let mut rng = substream(seed, ODD_POLICY_STREAM);
    let pick = rng.random_range(0..members.len());
    Some(members[pick])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::LabelVector;
    use alloc::vec;

    fn cloud_1d(xs: &[f64]) -> PointCloud {
        PointCloud::new(xs.to_vec(), xs.len(), 1).unwrap()
    }

    fn distances_1d(xs: &[f64]) -> DistanceMatrix {
        pairwise_distances(&cloud_1d(xs), Metric::Euclidean)
    }

    #[test]
    fn pairwise_distances_basics() {
        let d = distances_1d(&[0.0, 3.0]);
        assert_eq!(d.get(0, 1), 3.0);
        assert_eq!(d.get(1, 0), 3.0);
        assert_eq!(d.get(0, 0), 0.0);

        let c = PointCloud::new(vec![0.0, 0.0, 3.0, 4.0], 2, 2).unwrap();
        let e = pairwise_distances(&c, Metric::Euclidean);
        assert!((e.get(0, 1) - 5.0).abs() < 1e-15);
        let m = pairwise_distances(&c, Metric::Manhattan);
        assert!((m.get(0, 1) - 7.0).abs() < 1e-15);
    }

    #[test]
    fn point_cloud_rejects_non_finite() {
        let err = PointCloud::new(vec![0.0, f64::NAN, 1.0, 2.0], 2, 2).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn matching_on_separated_pairs() {
        let d = distances_1d(&[0.0, 1.0, 10.0, 11.0]);
        let m = min_nonbipartite_matching(&d).unwrap();
        assert_eq!(m.pairs(), &[(0, 1), (2, 3)]);
        assert!((m.weight() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn matching_two_points() {
        let d = distances_1d(&[4.0, 7.5]);
        let m = min_nonbipartite_matching(&d).unwrap();
        assert_eq!(m.pairs(), &[(0, 1)]);
        assert!((m.weight() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn matching_rejects_odd_n() {
        let d = distances_1d(&[0.0, 1.0, 2.0]);
        assert!(matches!(
            min_nonbipartite_matching(&d),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn duplicate_points_are_fine() {
        let d = distances_1d(&[1.0, 1.0, 1.0, 1.0]);
        let m = min_nonbipartite_matching(&d).unwrap();
        assert_eq!(m.num_pairs(), 2);
        assert_eq!(m.weight(), 0.0);
    }

    #[test]
    fn brute_force_basics() {
        let d = distances_1d(&[0.0, 1.0, 10.0, 11.0]);
        let m = brute_force_matching(&d).unwrap();
        assert_eq!(m.pairs(), &[(0, 1), (2, 3)]);
        assert!((m.weight() - 2.0).abs() < 1e-15);

        let two = distances_1d(&[0.0, 2.0]);
        assert_eq!(brute_force_matching(&two).unwrap().pairs(), &[(0, 1)]);

        let big = distances_1d(&[0.0; 14]);
        assert!(matches!(
            brute_force_matching(&big),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn mst_collinear() {
        let d = distances_1d(&[0.0, 1.0, 2.0]);
        let t = minimum_spanning_tree(&d);
        assert_eq!(t.edges(), &[(0, 1), (1, 2)]);
        assert!((t.total_weight() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mst_two_points() {
        let d = distances_1d(&[0.0, 5.0]);
        let t = minimum_spanning_tree(&d);
        assert_eq!(t.edges(), &[(0, 1)]);
        assert!((t.total_weight() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn odd_policy_prefers_largest_group() {
        // sizes (3, 2): drop from group 0
        let labels = LabelVector::new(vec![0, 0, 0, 1, 1]).unwrap();
        let dropped = apply_odd_policy(&labels, 42).unwrap();
        assert!(dropped < 3);

        // sizes (2, 2, 3): drop from group 2
        let labels = LabelVector::new(vec![0, 0, 1, 1, 2, 2, 2]).unwrap();
        let dropped = apply_odd_policy(&labels, 7).unwrap();
        assert!(labels.labels()[dropped] == 2);

        // even N: no-op
        let labels = LabelVector::new(vec![0, 0, 1, 1]).unwrap();
        assert_eq!(apply_odd_policy(&labels, 1), None);

        // ties broken by lowest group id, deterministic across calls
        let labels = LabelVector::new(vec![0, 0, 0, 1, 1, 1, 2]).unwrap();
        let first = apply_odd_policy(&labels, 5).unwrap();
        assert!(labels.labels()[first] == 0);
        assert_eq!(first, apply_odd_policy(&labels, 5).unwrap());
    }

    #[test]
    fn distance_matrix_validation() {
        // slight asymmetry is averaged
        let d = DistanceMatrix::from_raw(vec![0.0, 1.0 + 5e-10, 1.0, 0.0], 2, 1e-9).unwrap();
        assert_eq!(d.get(0, 1), d.get(1, 0));

        // gross asymmetry is rejected
        let err = DistanceMatrix::from_raw(vec![0.0, 2.0, 1.0, 0.0], 2, 1e-9).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));

        let err = DistanceMatrix::from_raw(vec![0.0, -1.0, -1.0, 0.0], 2, 1e-9).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn standardization_centers_and_scales() {
        let c = PointCloud::new(vec![0.0, 10.0, 2.0, 10.0, 4.0, 10.0], 3, 2).unwrap();
        let s = c.standardized();
        let mean0: f64 = (0..3).map(|i| s.row(i)[0]).sum::<f64>() / 3.0;
        assert!(mean0.abs() < 1e-12);
        // constant feature centered to zero, not blown up
        assert_eq!(s.row(0)[1], 0.0);
    }
}
