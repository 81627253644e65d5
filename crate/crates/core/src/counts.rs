//! Group labels and the cross/pure count matrix derived from a matching or
//! spanning tree.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{EdgeList, Matching};

/// Group assignment for the pooled sample. Ids are 0-based and contiguous;
/// every group is nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    group_sizes: Vec<usize>,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("label vector is empty".into()));
        }
        let k = labels.iter().max().unwrap() + 1;
        let mut group_sizes = vec![0usize; k];
        for &l in &labels {
            group_sizes[l] += 1;
        }
        if let Some(g) = group_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidInput(format!(
                "group ids must be contiguous: group {} is empty",
                g
            )));
        }
        Ok(LabelVector {
            labels,
            group_sizes,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// Labels with entry `index` removed (odd-size policy).
    pub fn without_index(&self, index: usize) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.remove(index);
        LabelVector::new(labels)
    }
}

/// Position of the pair (s, t), s < t, in the canonical cross-count order
/// (a_12, ..., a_1K, a_23, ..., a_2K, ..., a_{K-1,K}).
///
/// This ordering is frozen here and shared by the null moments and the test
/// statistics; a mismatch between the mean vector and the covariance would
/// silently corrupt the Mahalanobis statistic.
#[inline]
pub fn pair_index(s: usize, t: usize, k: usize) -> usize {
    debug_assert!(s < t && t < k);
    s * (2 * k - s - 1) / 2 + (t - s - 1)
}

/// All (s, t) pairs with s < t in canonical order.
pub fn pair_order(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for s in 0..k {
        for t in (s + 1)..k {
            out.push((s, t));
        }
    }
    out
}

/// Symmetric K x K matrix of pure (diagonal) and cross (off-diagonal) edge
/// counts. For a matching on group sizes N_s it satisfies
/// 2 a_ss + sum_{t != s} a_st = N_s for every s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    a: Vec<u64>,
    k: usize,
}

impl CountMatrix {
    pub fn zeros(k: usize) -> Self {
        CountMatrix {
            a: vec![0; k * k],
            k,
        }
    }

    pub fn from_upper(k: usize, entries: &[(usize, usize, u64)]) -> Self {
        let mut m = CountMatrix::zeros(k);
        for &(s, t, v) in entries {
            m.set(s, t, v);
        }
        m
    }

    pub fn num_groups(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize) -> u64 {
        self.a[s * self.k + t]
    }

    pub fn set(&mut self, s: usize, t: usize, v: u64) {
        self.a[s * self.k + t] = v;
        self.a[t * self.k + s] = v;
    }

    fn add_edge(&mut self, s: usize, t: usize) {
        self.a[s * self.k + t] += 1;
        if s != t {
            self.a[t * self.k + s] += 1;
        }
    }

    /// Row-major copy of the full matrix.
    pub fn to_row_major(&self) -> Vec<u64> {
        self.a.clone()
    }

    /// Upper-triangular cross counts in canonical order.
    pub fn cross_vector(&self) -> CountVector {
        let mut v = Vec::with_capacity(self.k * (self.k - 1) / 2);
        for (s, t) in pair_order(self.k) {
            v.push(self.get(s, t));
        }
        CountVector { v, k: self.k }
    }

    /// Total number of cross edges, sum over s < t of a_st.
    pub fn cross_edge_total(&self) -> u64 {
        pair_order(self.k)
            .into_iter()
            .map(|(s, t)| self.get(s, t))
            .sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|s| self.get(s, s)).sum()
    }

    /// Checks 2 a_ss + sum_{t != s} a_st = N_s for every group.
    pub fn satisfies_row_constraint(&self, group_sizes: &[usize]) -> bool {
        if group_sizes.len() != self.k {
            return false;
        }
        for s in 0..self.k {
            let mut acc = 2 * self.get(s, s);
            for t in 0..self.k {
                if t != s {
                    acc += self.get(s, t);
                }
            }
            if acc != group_sizes[s] as u64 {
                return false;
            }
        }
        true
    }
}

/// Vectorized cross counts, length C(K,2), canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    v: Vec<u64>,
    k: usize,
}

impl CountVector {
    pub fn values(&self) -> &[u64] {
        &self.v
    }

    pub fn num_groups(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.v.iter().sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.v.iter().map(|&x| x as f64).collect()
    }
}

/// Tallies the count matrix of a matching under the given labels.
pub fn count_matrix(matching: &Matching, labels: &LabelVector) -> Result<CountMatrix> {
    if 2 * matching.num_pairs() != labels.n() {
        return Err(Error::InvalidInput(format!(
            "matching covers {} indices but there are {} labels",
            2 * matching.num_pairs(),
            labels.n()
        )));
    }
    let mut m = CountMatrix::zeros(labels.num_groups());
    for &(i, j) in matching.pairs() {
        let (s, t) = (labels.labels()[i], labels.labels()[j]);
        m.add_edge(s.min(t), s.max(t));
    }
    Ok(m)
}

/// Number of tree edges whose endpoints carry different labels.
pub fn mst_cross_total(edges: &EdgeList, labels: &LabelVector) -> u64 {
    edges
        .edges()
        .iter()
        .filter(|&&(i, j)| labels.labels()[i] != labels.labels()[j])
        .count() as u64
}

/// Per-pair tally of tree edges, used for test diagnostics. Unlike a
/// matching tally this does not obey the matching row constraint.
pub fn mst_count_matrix(edges: &EdgeList, labels: &LabelVector) -> CountMatrix {
    let mut m = CountMatrix::zeros(labels.num_groups());
    for &(i, j) in edges.edges() {
        let (s, t) = (labels.labels()[i], labels.labels()[j]);
        m.add_edge(s.min(t), s.max(t));
    }
    m
}
