//! Distribution families, competing parametric tests, and the
//! power-estimation harness.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::alternative::{AlternativeSpec, Density, MultivariateNormal};
use crate::counts::{count_matrix, mst_cross_total, LabelVector};
use crate::error::{Error, Result};

use crate::geometry::{
    min_nonbipartite_matching, minimum_spanning_tree, pairwise_distances, Metric, PointCloud,
};
use crate::ksample::{
    asymptotic_pvalue_mcm, asymptotic_pvalue_mmcm, exact_pvalue, mcm_statistic, mmcm_statistic,
    Calibration, CalibrationSpec, ExactStatistic, Method,
};
use crate::linalg::{cholesky_solve, Matrix};
use crate::null_dist::{null_moments, GroupSizes};
use crate::rng::{derive_seed, substream};
use crate::special::{chi_squared_sf, f_sf};

/// The alternative families of the power studies. Group s (1-based) draws
/// from the family's s-th member; the separation Delta interpolates from
/// the null at Delta = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    NormalLocation,
    NormalSphericalScale,
    NormalEquicorrelated,
    LognormalLocation,
    LognormalSphericalScale,
    LognormalEquicorrelated,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::NormalLocation => "normal-location",
            Family::NormalSphericalScale => "normal-spherical-scale",
            Family::NormalEquicorrelated => "normal-equicorrelated",
            Family::LognormalLocation => "lognormal-location",
            Family::LognormalSphericalScale => "lognormal-spherical-scale",
            Family::LognormalEquicorrelated => "lognormal-equicorrelated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "normal-location" => Family::NormalLocation,
            "normal-spherical-scale" => Family::NormalSphericalScale,
            "normal-equicorrelated" => Family::NormalEquicorrelated,
            "lognormal-location" => Family::LognormalLocation,
            "lognormal-spherical-scale" => Family::LognormalSphericalScale,
            "lognormal-equicorrelated" => Family::LognormalEquicorrelated,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown family '{}'",
                    other
                )))
            }
        })
    }

    fn is_lognormal(&self) -> bool {
        matches!(
            self,
            Family::LognormalLocation
                | Family::LognormalSphericalScale
                | Family::LognormalEquicorrelated
        )
    }
}

/// A fully specified simulation scenario.
#[derive(Debug, Clone)]
pub struct FamilyConfig {
    pub family: Family,
    pub dim: usize,
    pub delta: f64,
    pub sizes: GroupSizes,
}

impl FamilyConfig {
    pub fn new(family: Family, dim: usize, delta: f64, sizes: GroupSizes) -> Result<Self> {
        if delta < 0.0 {
            return Err(Error::InvalidInput(format!(
                "separation must be nonnegative, got {}",
                delta
            )));
        }
        if matches!(
            family,
            Family::NormalEquicorrelated | Family::LognormalEquicorrelated
        ) && delta >= 1.0
        {
            // rho_s = (s-1) Delta / (K-1) peaks at Delta
            return Err(Error::InvalidInput(format!(
                "equicorrelated families need Delta in [0, 1), got {}",
                delta
            )));
        }
        Ok(FamilyConfig {
            family,
            dim,
            delta,
            sizes,
        })
    }

    pub fn k(&self) -> usize {
        self.sizes.k()
    }

    /// The density group `s` (0-based) draws from.
    pub fn group_density(&self, s: usize) -> Result<MultivariateNormal> {
        let k = self.k();
        let step = s as f64;
        let log = self.family.is_lognormal();
        match self.family {
            Family::NormalLocation | Family::LognormalLocation => {
                MultivariateNormal::new(self.dim, step * self.delta, 1.0, 0.0, log)
            }
            Family::NormalSphericalScale | Family::LognormalSphericalScale => {
                MultivariateNormal::new(self.dim, 0.0, 1.0 + step * self.delta, 0.0, log)
            }
            Family::NormalEquicorrelated | Family::LognormalEquicorrelated => {
                let rho = step * self.delta / (k as f64 - 1.0);
                MultivariateNormal::new(self.dim, 0.0, 1.0, rho, log)
            }
        }
    }

    /// The scenario as an alternative spec with proportions N_s / N.
    pub fn alternative_spec(&self) -> Result<AlternativeSpec> {
        let n = self.sizes.n() as f64;
        let mut densities: Vec<Box<dyn Density>> = Vec::with_capacity(self.k());
        for s in 0..self.k() {
            densities.push(Box::new(self.group_density(s)?));
        }
        let proportions = self
            .sizes
            .sizes()
            .iter()
            .map(|&x| x as f64 / n)
            .collect();
        AlternativeSpec::new(densities, proportions)
    }
}

/// Draws one dataset from the scenario: group s contributes N_s rows from
/// its density, labels in contiguous blocks.
pub fn sample_family(cfg: &FamilyConfig, seed: u64) -> Result<(PointCloud, LabelVector)> {
    let n = cfg.sizes.n();
    let d = cfg.dim;
    let mut rng = substream(seed, 0);
    let mut data = vec![0.0; n * d];
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (s, &ns) in cfg.sizes.sizes().iter().enumerate() {
        let density = cfg.group_density(s)?;
        for _ in 0..ns {
            density.sample_into(&mut rng, &mut data[row * d..(row + 1) * d]);
            labels.push(s);
            row += 1;
        }
    }
    Ok((PointCloud::new(data, n, d)?, LabelVector::new(labels)?))
}

/// Empirical power of each requested method.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub methods: Vec<Method>,
    pub power: Vec<f64>,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub calibration: Calibration,
    pub permutations: Option<usize>,
}

/// One power replicate: samples a dataset, runs every requested method on
/// it (paired comparison), and reports the rejection flags at level alpha.
/// Pure in (seed, replicate), so replicates can run on any worker layout.
pub fn power_replicate(
    cfg: &FamilyConfig,
    methods: &[Method],
    alpha: f64,
    calibration: CalibrationSpec,
    seed: u64,
    replicate: u64,
) -> Result<Vec<bool>> {
    let rep_seed = derive_seed(seed, replicate);
    let (cloud, labels) = sample_family(cfg, rep_seed)?;
    let pvalues = run_methods_shared(&cloud, &labels, methods, calibration, rep_seed)?;
    Ok(pvalues.into_iter().map(|p| p <= alpha).collect())
}

/// Runs all requested methods on one dataset, computing the matching and
/// the spanning tree at most once each.
fn run_methods_shared(
    cloud: &PointCloud,
    labels: &LabelVector,
    methods: &[Method],
    calibration: CalibrationSpec,
    seed: u64,
) -> Result<Vec<f64>> {
    let distances = pairwise_distances(cloud, Metric::Euclidean);
    let gs = GroupSizes::from_labels(labels)?;
    let needs_matching = methods.iter().any(|m| matches!(m, Method::Mcm | Method::Mmcm));
    let needs_tree = methods.contains(&Method::Mfrt);
    let matching = if needs_matching {
        Some(min_nonbipartite_matching(&distances)?)
    } else {
        None
    };
    let tree = if needs_tree {
        Some(minimum_spanning_tree(&distances))
    } else {
        None
    };
    let moments = if methods.contains(&Method::Mmcm) {
        let nm = null_moments(&gs)?;
        let chol = nm.cov.cholesky()?;
        Some((nm, chol))
    } else {
        None
    };

    let stat_for = |labs: &LabelVector, method: Method| -> f64 {
        match method {
            Method::Mcm => matching
                .as_ref()
                .expect("matching prepared")
                .pairs()
                .iter()
                .filter(|&&(i, j)| labs.labels()[i] != labs.labels()[j])
                .count() as f64,
            Method::Mmcm => {
                let (nm, chol) = moments.as_ref().expect("moments prepared");
                let cm = count_matrix(matching.as_ref().unwrap(), labs)
                    .expect("matching covers labels");
                let centered: Vec<f64> = cm
                    .cross_vector()
                    .as_f64()
                    .iter()
                    .zip(nm.mean.iter())
                    .map(|(a, b)| a - b)
                    .collect();
                let solved = cholesky_solve(chol, &centered);
                centered.iter().zip(solved.iter()).map(|(a, b)| a * b).sum()
            }
            Method::Mfrt => mst_cross_total(tree.as_ref().expect("tree prepared"), labs) as f64,
        }
    };

    match calibration {
        CalibrationSpec::Asymptotic => methods
            .iter()
            .map(|&m| match m {
                Method::Mcm => {
                    let cm = count_matrix(matching.as_ref().unwrap(), labels)?;
                    let q = mcm_statistic(&cm.cross_vector(), &gs)?;
                    Ok(asymptotic_pvalue_mcm(q))
                }
                Method::Mmcm => {
                    let nm = null_moments(&gs)?;
                    let cm = count_matrix(matching.as_ref().unwrap(), labels)?;
                    let s = mmcm_statistic(&cm.cross_vector(), &nm)?;
                    Ok(asymptotic_pvalue_mmcm(s, gs.k()))
                }
                Method::Mfrt => Err(Error::Unsupported(
                    "the MFRT needs permutation calibration".into(),
                )),
            })
            .collect(),
        CalibrationSpec::Exact => methods
            .iter()
            .map(|&m| match m {
                Method::Mcm => {
                    let cm = count_matrix(matching.as_ref().unwrap(), labels)?;
                    exact_pvalue(&gs, cm.cross_edge_total() as f64, ExactStatistic::McmRaw)
                }
                Method::Mmcm => {
                    let nm = null_moments(&gs)?;
                    let cm = count_matrix(matching.as_ref().unwrap(), labels)?;
                    let s = mmcm_statistic(&cm.cross_vector(), &nm)?;
                    exact_pvalue(&gs, s, ExactStatistic::Mmcm)
                }
                Method::Mfrt => Err(Error::Unsupported(
                    "the MFRT needs permutation calibration".into(),
                )),
            })
            .collect(),
        CalibrationSpec::Permutation { permutations } => {
            if permutations < 1 {
                return Err(Error::InvalidInput(
                    "permutation count must be at least 1".into(),
                ));
            }
            let observed: Vec<f64> = methods.iter().map(|&m| stat_for(labels, m)).collect();
            let mut extreme = vec![0usize; methods.len()];
            let mut working: Vec<usize> = labels.labels().to_vec();
            for b in 0..permutations {
                let mut rng = substream(derive_seed(seed, 1), b as u64);
                working.shuffle(&mut rng);
                let permuted = LabelVector::new(working.clone())?;
                for (mi, &m) in methods.iter().enumerate() {
                    let stat = stat_for(&permuted, m);
                    let hit = match m {
                        Method::Mcm | Method::Mfrt => stat <= observed[mi],
                        Method::Mmcm => stat >= observed[mi],
                    };
                    if hit {
                        extreme[mi] += 1;
                    }
                }
            }
            Ok(extreme
                .iter()
                .map(|&e| (1.0 + e as f64) / (permutations as f64 + 1.0))
                .collect())
        }
    }
}

/// Sequential power estimate over `replicates` datasets; each dataset is
/// shared by all methods.
pub fn estimate_power(
    cfg: &FamilyConfig,
    methods: &[Method],
    alpha: f64,
    replicates: usize,
    calibration: CalibrationSpec,
    seed: u64,
) -> Result<PowerReport> {
    if replicates < 1 {
        return Err(Error::InvalidInput("need at least 1 replicate".into()));
    }
    let mut rejections = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        rejections.push(power_replicate(
            cfg,
            methods,
            alpha,
            calibration,
            seed,
            rep as u64,
        )?);
    }
    Ok(assemble_power(
        methods,
        &rejections,
        alpha,
        seed,
        calibration,
    ))
}

/// Folds per-replicate rejection flags (as produced by `power_replicate`)
/// into a report; the entry point for parallel drivers.
pub fn assemble_power(
    methods: &[Method],
    rejections: &[Vec<bool>],
    alpha: f64,
    seed: u64,
    calibration: CalibrationSpec,
) -> PowerReport {
    let replicates = rejections.len();
    let mut power = vec![0.0; methods.len()];
    for flags in rejections {
        for (i, &r) in flags.iter().enumerate() {
            if r {
                power[i] += 1.0;
            }
        }
    }
    for p in power.iter_mut() {
        *p /= replicates as f64;
    }
    PowerReport {
        methods: methods.to_vec(),
        power,
        replicates,
        alpha,
        seed,
        calibration: calibration.tag(),
        permutations: match calibration {
            CalibrationSpec::Permutation { permutations } => Some(permutations),
            _ => None,
        },
    }
}

/// Multisample location test: builds the (K-1)d contrast vector from the
/// i-th observation of each class and applies Hotelling's T-squared with
/// its F reference distribution. Requires equal group sizes and
/// d < N / (K (K - 1)).
pub fn anderson_test(cloud: &PointCloud, labels: &LabelVector) -> Result<f64> {
    let k = labels.num_groups();
    if k < 2 {
        return Err(Error::InvalidInput("need at least 2 groups".into()));
    }
    let sizes = labels.group_sizes();
    let n_per = sizes[0];
    if sizes.iter().any(|&s| s != n_per) {
        return Err(Error::Unsupported(
            "the contrast construction requires equal group sizes".into(),
        ));
    }
    let d = cloud.dim();
    let n_total = cloud.n();
    if d >= n_total / (k * (k - 1)) {
        return Err(Error::Unsupported(format!(
            "dimension {} is at or above the applicability bound N/(K(K-1)) = {}",
            d,
            n_total / (k * (k - 1))
        )));
    }
    let q = (k - 1) * d;

    // rows of each group in order of appearance
    let mut group_rows: Vec<Vec<usize>> = vec![Vec::with_capacity(n_per); k];
    for (i, &l) in labels.labels().iter().enumerate() {
        group_rows[l].push(i);
    }

    // contrast vectors V_i = (X_i^(1) - X_i^(2), ..., X_i^(K-1) - X_i^(K))
    let mut v = Matrix::zeros(n_per, q);
    for i in 0..n_per {
        for s in 0..(k - 1) {
            let a = cloud.row(group_rows[s][i]);
            let b = cloud.row(group_rows[s + 1][i]);
            for j in 0..d {
                v[(i, s * d + j)] = a[j] - b[j];
            }
        }
    }
    let mut mean = vec![0.0; q];
    for i in 0..n_per {
        for j in 0..q {
            mean[j] += v[(i, j)];
        }
    }
    for m in mean.iter_mut() {
        *m /= n_per as f64;
    }
    let mut cov = Matrix::zeros(q, q);
    for i in 0..n_per {
        for a in 0..q {
            let ca = v[(i, a)] - mean[a];
            for b in a..q {
                cov[(a, b)] += ca * (v[(i, b)] - mean[b]);
            }
        }
    }
    for a in 0..q {
        for b in a..q {
            let val = cov[(a, b)] / (n_per as f64 - 1.0);
            cov[(a, b)] = val;
            cov[(b, a)] = val;
        }
    }
    let chol = cov.cholesky().map_err(|_| {
        Error::Unsupported("contrast covariance is singular; more samples per group needed".into())
    })?;
    let solved = cholesky_solve(&chol, &mean);
    let t2 = n_per as f64 * mean.iter().zip(solved.iter()).map(|(a, b)| a * b).sum::<f64>();
    let n_f = n_per as f64;
    let q_f = q as f64;
    if n_per <= q {
        return Err(Error::Unsupported(
            "need more observations per group than contrast dimensions".into(),
        ));
    }
    let f_stat = t2 * (n_f - q_f) / (q_f * (n_f - 1.0));
    Ok(f_sf(f_stat, q, n_per - q))
}

/// Likelihood-ratio test for equality of covariance matrices with unknown
/// means: -2 log lambda = sum_i N_i (log det S - log det S_i) against
/// chi-squared with d(d+1)(K-1)/2 degrees of freedom.
pub fn lrt_covariance(cloud: &PointCloud, labels: &LabelVector) -> Result<f64> {
    let k = labels.num_groups();
    let d = cloud.dim();
    let sizes = labels.group_sizes();
    if sizes.iter().any(|&s| s <= d) {
        return Err(Error::Unsupported(format!(
            "every group must have more than d = {} observations for an invertible covariance",
            d
        )));
    }
    let n_total = cloud.n() as f64;

    let mut group_rows: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.labels().iter().enumerate() {
        group_rows[l].push(i);
    }

    let mut pooled = Matrix::zeros(d, d);
    let mut logdets = Vec::with_capacity(k);
    for rows in &group_rows {
        let ni = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for &r in rows {
            for (m, x) in mean.iter_mut().zip(cloud.row(r)) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= ni;
        }
        let mut cov = Matrix::zeros(d, d);
        for &r in rows {
            let x = cloud.row(r);
            for a in 0..d {
                let ca = x[a] - mean[a];
                for b in a..d {
                    cov[(a, b)] += ca * (x[b] - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let val = cov[(a, b)] / ni;
                cov[(a, b)] = val;
                cov[(b, a)] = val;
                pooled[(a, b)] += val * ni / n_total;
                if a != b {
                    pooled[(b, a)] = pooled[(a, b)];
                }
            }
        }
        let logdet = cov.logdet_spd().map_err(|_| {
            Error::Unsupported("a group covariance matrix is singular".into())
        })?;
        logdets.push((ni, logdet));
    }
    let pooled_logdet = pooled
        .logdet_spd()
        .map_err(|_| Error::Unsupported("the pooled covariance matrix is singular".into()))?;
    let stat: f64 = logdets
        .iter()
        .map(|&(ni, ld)| ni * (pooled_logdet - ld))
        .sum();
    let df = d * (d + 1) * (k - 1) / 2;
    Ok(chi_squared_sf(stat.max(0.0), df))
}
