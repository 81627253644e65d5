//! Cross-module invariants: matching optimality against brute force,
//! count-matrix identities, pmf-vs-simulation agreement, calibration
//! consistency.

use proptest::prelude::*;

use crossmatch_core::counts::{count_matrix, pair_order, CountMatrix, LabelVector};
use crossmatch_core::geometry::{
    brute_force_matching, min_nonbipartite_matching, minimum_spanning_tree,
    pairwise_distances, DistanceMatrix, Metric, PointCloud,
};
use crossmatch_core::ksample::{
    exact_pvalue, mcm_statistic, mmcm_statistic, permutation_test, run_test, CalibrationSpec,
    DataInput, ExactStatistic, Method,
};
use crossmatch_core::null_dist::{
    exact_pmf, null_covariance, null_mean, null_moments, GroupSizes,
};
use crossmatch_core::rng::substream;
use crossmatch_core::special::chi_squared_sf;

use rand::prelude::*;
use rand_distr::StandardNormal;

fn random_cloud(n: usize, d: usize, seed: u64) -> PointCloud {
    let mut rng = substream(seed, 0);
    let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    PointCloud::new(data, n, d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matching_equals_brute_force(seed in 0u64..10_000, half in 2usize..=5, d in 1usize..=3) {
        let n = 2 * half;
        let cloud = random_cloud(n, d, seed);
        let dist = pairwise_distances(&cloud, Metric::Euclidean);
        let fast = min_nonbipartite_matching(&dist).unwrap();
        let slow = brute_force_matching(&dist).unwrap();
        // identical weight when both sums run in canonical pair order
        prop_assert_eq!(fast.weight(), slow.weight());
    }

    #[test]
    fn matching_is_a_partition(seed in 0u64..10_000, half in 1usize..=8) {
        let n = 2 * half;
        let cloud = random_cloud(n, 2, seed);
        let m = min_nonbipartite_matching(&pairwise_distances(&cloud, Metric::Euclidean)).unwrap();
        let mut seen = vec![false; n];
        for &(i, j) in m.pairs() {
            prop_assert!(i < j);
            prop_assert!(!seen[i] && !seen[j]);
            seen[i] = true;
            seen[j] = true;
        }
        prop_assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn weights_invariant_under_relabeling(seed in 0u64..10_000, half in 2usize..=6) {
        let n = 2 * half;
        let cloud = random_cloud(n, 2, seed);
        let dist = pairwise_distances(&cloud, Metric::Euclidean);

        // permute indices and rebuild the distance matrix
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = substream(seed, 1);
        idx.shuffle(&mut rng);
        let mut permuted = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                permuted[i * n + j] = dist.get(idx[i], idx[j]);
            }
        }
        let dist_p = DistanceMatrix::from_raw(permuted, n, 1e-9).unwrap();

        let w1 = min_nonbipartite_matching(&dist).unwrap().weight();
        let w2 = min_nonbipartite_matching(&dist_p).unwrap().weight();
        prop_assert!((w1 - w2).abs() <= 1e-9 * (1.0 + w1.abs()));

        let t1 = minimum_spanning_tree(&dist).total_weight();
        let t2 = minimum_spanning_tree(&dist_p).total_weight();
        prop_assert!((t1 - t2).abs() <= 1e-9 * (1.0 + t1.abs()));
    }

    #[test]
    fn triangle_inequality_spot_checks(seed in 0u64..10_000, metric_id in 0usize..2) {
        let metric = if metric_id == 0 { Metric::Euclidean } else { Metric::Manhattan };
        let cloud = random_cloud(6, 3, seed);
        let d = pairwise_distances(&cloud, metric);
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    prop_assert!(d.get(i, j) <= d.get(i, k) + d.get(k, j) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn count_matrix_identities(seed in 0u64..10_000, sizes in prop::collection::vec(1usize..=4, 2..=4)) {
        let n: usize = sizes.iter().sum();
        prop_assume!(n % 2 == 0);
        let mut labels = Vec::new();
        for (g, &s) in sizes.iter().enumerate() {
            labels.extend(std::iter::repeat(g).take(s));
        }
        let mut rng = substream(seed, 2);
        labels.shuffle(&mut rng);
        let labels = LabelVector::new(labels).unwrap();

        let cloud = random_cloud(n, 2, seed);
        let m = min_nonbipartite_matching(&pairwise_distances(&cloud, Metric::Euclidean)).unwrap();
        let cm = count_matrix(&m, &labels).unwrap();
        prop_assert!(cm.satisfies_row_constraint(labels.group_sizes()));
        prop_assert_eq!(cm.cross_edge_total() + cm.trace(), (n / 2) as u64);
    }

    #[test]
    fn bh_adjustment_properties(p in prop::collection::vec(0.0f64..=1.0, 1..=12)) {
        let adj = crossmatch_core::ksample::bh_adjust(&p).unwrap();
        for (raw, a) in p.iter().zip(adj.iter()) {
            prop_assert!(*a >= *raw - 1e-15);
            prop_assert!(*a <= 1.0 + 1e-15);
        }
        // order preserving
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] <= p[j] {
                    prop_assert!(adj[i] <= adj[j] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn mmcm_equals_squared_mcm_for_two_groups(n1 in 2usize..=30, n2 in 2usize..=30, r in 0u64..=20) {
        prop_assume!((n1 + n2) % 2 == 0);
        let r = r.min(n1 as u64).min(n2 as u64);
        prop_assume!((n1 as u64 - r) % 2 == 0 && (n2 as u64 - r) % 2 == 0);
        let gs = GroupSizes::new(vec![n1, n2]).unwrap();
        let cm = CountMatrix::from_upper(
            2,
            &[(0, 1, r), (0, 0, (n1 as u64 - r) / 2), (1, 1, (n2 as u64 - r) / 2)],
        );
        let v = cm.cross_vector();
        let q = mcm_statistic(&v, &gs).unwrap();
        let s = mmcm_statistic(&v, &null_moments(&gs).unwrap()).unwrap();
        prop_assert!((s - q * q).abs() < 1e-9 * (1.0 + s.abs()));
    }

    #[test]
    fn mmcm_invariant_under_group_relabeling(seed in 0u64..1_000) {
        // swapping group ids consistently leaves S unchanged
        let sizes = [4usize, 6, 8];
        let gs = GroupSizes::new(sizes.to_vec()).unwrap();
        let mut labels = Vec::new();
        for (g, &s) in sizes.iter().enumerate() {
            labels.extend(std::iter::repeat(g).take(s));
        }
        let mut rng = substream(seed, 3);
        labels.shuffle(&mut rng);
        let cloud = random_cloud(18, 2, seed);
        let m = min_nonbipartite_matching(&pairwise_distances(&cloud, Metric::Euclidean)).unwrap();

        let lv = LabelVector::new(labels.clone()).unwrap();
        let s1 = mmcm_statistic(
            &count_matrix(&m, &lv).unwrap().cross_vector(),
            &null_moments(&gs).unwrap(),
        )
        .unwrap();

        // relabel 0 <-> 2 (sizes permute accordingly)
        let swapped: Vec<usize> = labels.iter().map(|&l| [2, 1, 0][l]).collect();
        let lv2 = LabelVector::new(swapped).unwrap();
        let gs2 = GroupSizes::new(vec![sizes[2], sizes[1], sizes[0]]).unwrap();
        let s2 = mmcm_statistic(
            &count_matrix(&m, &lv2).unwrap().cross_vector(),
            &null_moments(&gs2).unwrap(),
        )
        .unwrap();
        prop_assert!((s1 - s2).abs() < 1e-9 * (1.0 + s1.abs()));
    }
}

/// Enumerates all distinct permutations of a multiset.
fn multiset_permutations(items: &[usize]) -> Vec<Vec<usize>> {
    fn rec(items: &mut Vec<usize>, start: usize, out: &mut Vec<Vec<usize>>) {
        if start == items.len() {
            out.push(items.clone());
            return;
        }
        let mut used = Vec::new();
        for i in start..items.len() {
            if used.contains(&items[i]) {
                continue;
            }
            used.push(items[i]);
            items.swap(start, i);
            rec(items, start + 1, out);
            items.swap(start, i);
        }
    }
    let mut items = items.to_vec();
    let mut out = Vec::new();
    rec(&mut items, 0, &mut out);
    out
}

/// Exhaustive permutation p-values equal the exact pmf p-values bit for
/// bit, for both tails.
#[test]
fn exhaustive_permutation_equals_exact_pvalue() {
    for sizes in [vec![2usize, 2], vec![3, 3], vec![2, 2, 2]] {
        let n: usize = sizes.iter().sum();
        let gs = GroupSizes::new(sizes.clone()).unwrap();
        let mut base_labels = Vec::new();
        for (g, &s) in sizes.iter().enumerate() {
            base_labels.extend(std::iter::repeat(g).take(s));
        }
        // a fixed matching: consecutive pairs
        let cloud = random_cloud(n, 3, 77);
        let dist = pairwise_distances(&cloud, Metric::Euclidean);
        let matching = min_nonbipartite_matching(&dist).unwrap();

        let arrangements = multiset_permutations(&base_labels);
        let nm = null_moments(&gs).unwrap();

        // every possible observed value of R and S
        for observed_arrangement in arrangements.iter().take(6) {
            let lv = LabelVector::new(observed_arrangement.clone()).unwrap();
            let cm = count_matrix(&matching, &lv).unwrap();
            let r_obs = cm.cross_edge_total() as f64;
            let s_obs = mmcm_statistic(&cm.cross_vector(), &nm).unwrap();

            let mut r_extreme = 0u128;
            let mut s_extreme = 0u128;
            for arrangement in &arrangements {
                let lv = LabelVector::new(arrangement.clone()).unwrap();
                let cm = count_matrix(&matching, &lv).unwrap();
                if (cm.cross_edge_total() as f64) <= r_obs {
                    r_extreme += 1;
                }
                if mmcm_statistic(&cm.cross_vector(), &nm).unwrap() >= s_obs {
                    s_extreme += 1;
                }
            }
            let total = arrangements.len() as u128;
            let p_perm_r = r_extreme as f64 / total as f64;
            let p_perm_s = s_extreme as f64 / total as f64;

            let p_exact_r = exact_pvalue(&gs, r_obs, ExactStatistic::McmRaw).unwrap();
            let p_exact_s = exact_pvalue(&gs, s_obs, ExactStatistic::Mmcm).unwrap();
            assert_eq!(p_perm_r.to_bits(), p_exact_r.to_bits(), "sizes {:?}", sizes);
            assert_eq!(p_perm_s.to_bits(), p_exact_s.to_bits(), "sizes {:?}", sizes);
        }
    }
}

/// The exact pmf matches empirical label-shuffling frequencies
/// (chi-squared goodness of fit, p > 0.001).
#[test]
fn exact_pmf_matches_shuffling_frequencies() {
    let sizes = vec![3usize, 3];
    let gs = GroupSizes::new(sizes.clone()).unwrap();
    let pmf = exact_pmf(&gs).unwrap();

    let mut labels = vec![0, 0, 0, 1, 1, 1];
    let mut rng = substream(123, 0);
    let reps = 100_000usize;
    let mut counts = vec![0u64; pmf.entries.len()];
    for _ in 0..reps {
        labels.shuffle(&mut rng);
        // fixed matching (0,1)(2,3)(4,5)
        let mut cm = CountMatrix::zeros(2);
        for pair in labels.chunks(2) {
            let (s, t) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            cm.set(s, t, cm.get(s, t) + 1);
        }
        let idx = pmf
            .entries
            .iter()
            .position(|e| e.matrix == cm)
            .expect("all outcomes are in the support");
        counts[idx] += 1;
    }
    let mut chi2 = 0.0;
    for (e, &c) in pmf.entries.iter().zip(counts.iter()) {
        let expected = e.probability * reps as f64;
        chi2 += (c as f64 - expected) * (c as f64 - expected) / expected;
    }
    let p = chi_squared_sf(chi2, pmf.entries.len() - 1);
    assert!(p > 0.001, "goodness-of-fit p = {}", p);
}

/// Null covariance scaled by 1/N stabilizes as N doubles.
#[test]
fn null_covariance_scaling_converges() {
    for mult in [1usize, 2, 4] {
        let base = [10 * mult, 14 * mult, 16 * mult];
        let doubled: Vec<usize> = base.iter().map(|&s| 2 * s).collect();
        let g1 = GroupSizes::new(base.to_vec()).unwrap();
        let g2 = GroupSizes::new(doubled).unwrap();
        let c1 = null_covariance(&g1).unwrap();
        let c2 = null_covariance(&g2).unwrap();
        let n1 = g1.n() as f64;
        for a in 0..c1.rows() {
            for b in 0..c1.cols() {
                let v1 = c1[(a, b)] / n1;
                let v2 = c2[(a, b)] / (2.0 * n1);
                assert!(
                    (v1 - v2).abs() < 8.0 / n1,
                    "entries {} vs {} at N = {}",
                    v1,
                    v2,
                    n1
                );
            }
        }
    }
}

/// Permutation p-values are super-uniform under exchangeability and live
/// on the grid {1/(B+1), ..., 1}.
#[test]
fn permutation_pvalues_super_uniform() {
    let b = 99usize;
    let reps = 200usize;
    let mut pvals = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = substream(rep as u64, 7);
        let data: Vec<f64> = (0..30 * 2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let cloud = PointCloud::new(data, 30, 2).unwrap();
        let labels =
            LabelVector::new((0..30).map(|i| if i < 15 { 0 } else { 1 }).collect()).unwrap();
        let dist = pairwise_distances(&cloud, Metric::Euclidean);
        let result = permutation_test(&dist, &labels, Method::Mcm, b, rep as u64).unwrap();
        pvals.push(result.p_value);
    }
    // support check
    for &p in &pvals {
        let scaled = p * (b as f64 + 1.0);
        assert!((scaled - scaled.round()).abs() < 1e-9);
        assert!(p > 0.0 && p <= 1.0);
    }
    // one-sided dominance: empirical P(p <= alpha) <= alpha + 3 sigma
    for alpha in [0.05, 0.1, 0.25, 0.5] {
        let hits = pvals.iter().filter(|&&p| p <= alpha).count() as f64 / reps as f64;
        let slack = 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt();
        assert!(
            hits <= alpha + slack,
            "P(p <= {}) = {} exceeds bound",
            alpha,
            hits
        );
    }
}

/// MST weight matches exhaustive enumeration over all labeled trees on 7
/// vertices (Pruefer decoding; the count 7^5 certifies completeness).
#[test]
fn mst_matches_pruefer_enumeration() {
    let n = 7usize;
    let cloud = random_cloud(n, 2, 4242);
    let d = pairwise_distances(&cloud, Metric::Euclidean);

    fn decode_pruefer(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
        let mut degree = vec![1usize; n];
        for &s in seq {
            degree[s] += 1;
        }
        let mut edges = Vec::with_capacity(n - 1);
        let mut seq = seq.to_vec();
        for _ in 0..seq.len() {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            let s = seq.remove(0);
            edges.push((leaf.min(s), leaf.max(s)));
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let remaining: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        edges.push((remaining[0], remaining[1]));
        edges
    }

    let mut best = f64::INFINITY;
    let mut count = 0u64;
    let mut seq = vec![0usize; n - 2];
    loop {
        let edges = decode_pruefer(&seq, n);
        let w: f64 = edges.iter().map(|&(i, j)| d.get(i, j)).sum();
        best = best.min(w);
        count += 1;
        // next sequence in base-n counting
        let mut pos = 0;
        loop {
            if pos == n - 2 {
                break;
            }
            seq[pos] += 1;
            if seq[pos] < n {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
        if pos == n - 2 {
            break;
        }
    }
    assert_eq!(count, 7u64.pow(5));
    let mst = minimum_spanning_tree(&d);
    assert!((mst.total_weight() - best).abs() < 1e-12);
}

/// End-to-end runner: identical seeds give identical results; widely
/// separated groups give decisive p-values; the odd policy drops a point.
#[test]
fn run_test_end_to_end() {
    // two identical single-point groups, exact calibration: only outcome
    let cloud = PointCloud::new(vec![0.25, 0.25], 2, 1).unwrap();
    let labels = LabelVector::new(vec![0, 1]).unwrap();
    let res = run_test(
        DataInput::Points(&cloud, Metric::Euclidean),
        &labels,
        Method::Mcm,
        CalibrationSpec::Exact,
        1,
    )
    .unwrap();
    assert_eq!(res.p_value, 1.0);

    // widely separated groups: tiny p-value
    let mut rng = substream(5, 0);
    let mut data = Vec::new();
    let mut labs = Vec::new();
    for g in 0..2 {
        for _ in 0..50 {
            for _ in 0..5 {
                let x: f64 = rng.sample(StandardNormal);
                data.push(x + g as f64 * 10.0);
            }
            labs.push(g);
        }
    }
    let cloud = PointCloud::new(data, 100, 5).unwrap();
    let labels = LabelVector::new(labs).unwrap();
    let res = run_test(
        DataInput::Points(&cloud, Metric::Euclidean),
        &labels,
        Method::Mmcm,
        CalibrationSpec::Asymptotic,
        1,
    )
    .unwrap();
    assert!(res.p_value < 1e-3);
    assert_eq!(res.df, Some(1));
    assert_eq!(res.count_matrix.get(0, 1), 0);

    // determinism
    let res2 = run_test(
        DataInput::Points(&cloud, Metric::Euclidean),
        &labels,
        Method::Mmcm,
        CalibrationSpec::Asymptotic,
        1,
    )
    .unwrap();
    assert_eq!(res, res2);

    // odd N resolved by deletion from the largest group
    let cloud = random_cloud(7, 2, 9);
    let labels = LabelVector::new(vec![0, 0, 0, 0, 1, 1, 1]).unwrap();
    let res = run_test(
        DataInput::Points(&cloud, Metric::Euclidean),
        &labels,
        Method::Mcm,
        CalibrationSpec::Permutation { permutations: 19 },
        3,
    )
    .unwrap();
    let dropped = res.dropped_index.unwrap();
    assert!(dropped < 4, "dropped index {} should be in group 0", dropped);
    assert_eq!(res.permutations, Some(19));

    // MFRT works on odd N without deletion
    let res = run_test(
        DataInput::Points(&cloud, Metric::Euclidean),
        &labels,
        Method::Mfrt,
        CalibrationSpec::Permutation { permutations: 19 },
        3,
    )
    .unwrap();
    assert_eq!(res.dropped_index, None);
}

/// Simulated pmf of the count matrix is the same under two different null
/// data distributions (distribution-freeness, small-scale version).
#[test]
fn count_distribution_is_distribution_free() {
    let sizes = [6usize, 6];
    let reps = 4_000;
    let mut tallies = [[0u64; 7], [0u64; 7]]; // R in 0..=6
    for (which, kind) in [0usize, 1].iter().zip(["normal", "uniform"]) {
        for rep in 0..reps {
            let mut rng = substream(rep as u64, 100 + *which as u64);
            let data: Vec<f64> = (0..12 * 2)
                .map(|_| {
                    if kind == "normal" {
                        rng.sample::<f64, _>(StandardNormal)
                    } else {
                        rng.random_range(0.0..1.0)
                    }
                })
                .collect();
            let cloud = PointCloud::new(data, 12, 2).unwrap();
            let labels =
                LabelVector::new((0..12).map(|i| if i < 6 { 0 } else { 1 }).collect()).unwrap();
            let m = min_nonbipartite_matching(&pairwise_distances(&cloud, Metric::Euclidean))
                .unwrap();
            let cm = count_matrix(&m, &labels).unwrap();
            tallies[*which][cm.cross_edge_total() as usize] += 1;
        }
        let _ = sizes;
    }
    // two-sample chi-squared over the supported cells
    let mut chi2 = 0.0;
    let mut df = 0usize;
    for r in 0..7 {
        let a = tallies[0][r] as f64;
        let b = tallies[1][r] as f64;
        if a + b < 10.0 {
            continue;
        }
        // expected under pooling
        let e = (a + b) / 2.0;
        chi2 += (a - e) * (a - e) / e + (b - e) * (b - e) / e;
        df += 1;
    }
    let p = chi_squared_sf(chi2, df.saturating_sub(1));
    assert!(p > 0.001, "distribution-freeness GOF p = {}", p);
}

/// Null means match the average count matrix over many shuffles of real
/// matchings (smoke test tying geometry, counts and moments together).
#[test]
fn null_mean_matches_simulation() {
    let sizes = vec![4usize, 4, 4];
    let gs = GroupSizes::new(sizes.clone()).unwrap();
    let mean = null_mean(&gs);
    let cloud = random_cloud(12, 3, 31);
    let m = min_nonbipartite_matching(&pairwise_distances(&cloud, Metric::Euclidean)).unwrap();
    let mut labels = vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
    let mut rng = substream(55, 0);
    let reps = 60_000;
    let mut acc = vec![0.0; 3];
    for _ in 0..reps {
        labels.shuffle(&mut rng);
        let lv = LabelVector::new(labels.clone()).unwrap();
        let cm = count_matrix(&m, &lv).unwrap();
        for (i, &(s, t)) in pair_order(3).iter().enumerate() {
            acc[i] += cm.get(s, t) as f64;
        }
    }
    for (a, m) in acc.iter().zip(mean.iter()) {
        let emp = a / reps as f64;
        assert!((emp - m).abs() < 0.03, "empirical {} vs mean {}", emp, m);
    }
}
