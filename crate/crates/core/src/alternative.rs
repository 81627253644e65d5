//! Behavior of the tests away from the null: almost-sure limits of the
//! count matrix, the Henze-Penrose divergence, the bootstrap alternative
//! sampler, conditional means given the pooled sample, and the limiting
//! covariance of the cross-count vector under general alternatives.
//!
//! Every integral is estimated by mixture sampling: draw Z from the mixture
//! phi = sum p_s f_s and average posterior-weight expressions
//! g_s(Z) = p_s f_s(Z) / phi(Z), which are bounded in [0, 1] no matter how
//! separated the densities are. Estimates are deterministic given
//! (seed, sample count): samples are consumed in fixed-size chunks, one RNG
//! substream per chunk, merged in chunk order.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::counts::pair_order;
use crate::error::{Error, Result};
use crate::geometry::{
    min_nonbipartite_matching, pairwise_distances, Matching, Metric, PointCloud,
};
use crate::linalg::{cholesky_solve, Matrix};
use crate::null_dist::GroupSizes;
use crate::rng::substream;
use crate::special::{ks_statistic, normal_cdf};

/// Samples per RNG substream; parallel and sequential evaluation of the
/// same estimator agree because chunks merge in index order.
pub const MC_CHUNK: usize = 8192;

/// A probability density that can be evaluated and sampled.
pub trait Density: Send + Sync {
    fn dim(&self) -> usize;
    /// Natural log of the density at `x` (`-inf` where the density is 0).
    fn log_density(&self, x: &[f64]) -> f64;
    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut [f64]);
}

/// Multivariate normal with mean `shift * 1` and covariance
/// `variance * ((1 - rho) I + rho 1 1')`, optionally pushed through an
/// entrywise exponential (lognormal).
#[derive(Debug, Clone)]
pub struct MultivariateNormal {
    shift: f64,
    variance: f64,
    rho: f64,
    dim: usize,
    lognormal: bool,
}

impl MultivariateNormal {
    pub fn new(dim: usize, shift: f64, variance: f64, rho: f64, lognormal: bool) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if !(variance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "variance must be positive, got {}",
                variance
            )));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidInput(format!(
                "equicorrelation must lie in [0, 1), got {}",
                rho
            )));
        }
        Ok(MultivariateNormal {
            shift,
            variance,
            rho,
            dim,
            lognormal,
        })
    }

    pub fn standard(dim: usize) -> Self {
        MultivariateNormal::new(dim, 0.0, 1.0, 0.0, false).expect("standard normal is valid")
    }
}

impl Density for MultivariateNormal {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim as f64;
        let mut jacobian = 0.0;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for &xi in x {
            let z = if self.lognormal {
                if xi <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let l = xi.ln();
                jacobian -= l;
                l
            } else {
                xi
            };
            let c = z - self.shift;
            sum += c;
            sumsq += c * c;
        }
        let denom = 1.0 + (d - 1.0) * self.rho;
        let quad = (sumsq - self.rho * sum * sum / denom) / (self.variance * (1.0 - self.rho));
        let logdet = d * self.variance.ln() + (d - 1.0) * (1.0 - self.rho).ln() + denom.ln();
        -0.5 * (d * (2.0 * core::f64::consts::PI).ln() + logdet + quad) + jacobian
    }

    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        // one-factor representation avoids any d x d factorization
        let common: f64 = if self.rho > 0.0 {
            StandardNormal.sample(rng)
        } else {
            0.0
        };
        let sd = self.variance.sqrt();
        let a = (1.0 - self.rho).sqrt();
        let b = self.rho.sqrt();
        for o in out.iter_mut() {
            let eps: f64 = StandardNormal.sample(rng);
            let z = self.shift + sd * (a * eps + b * common);
            *o = if self.lognormal { z.exp() } else { z };
        }
    }
}

/// K candidate densities with limiting mixture proportions.
pub struct AlternativeSpec {
    densities: Vec<Box<dyn Density>>,
    proportions: Vec<f64>,
}

impl AlternativeSpec {
    pub fn new(densities: Vec<Box<dyn Density>>, proportions: Vec<f64>) -> Result<Self> {
        if densities.len() < 2 {
            return Err(Error::InvalidInput("need at least 2 densities".into()));
        }
        if densities.len() != proportions.len() {
            return Err(Error::InvalidInput(format!(
                "{} densities but {} proportions",
                densities.len(),
                proportions.len()
            )));
        }
        if proportions.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidInput(
                "proportions must lie strictly inside (0, 1)".into(),
            ));
        }
        let total: f64 = proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "proportions sum to {}, expected 1",
                total
            )));
        }
        let dim = densities[0].dim();
        if densities.iter().any(|f| f.dim() != dim) {
            return Err(Error::InvalidInput(
                "all densities must share one dimension".into(),
            ));
        }
        // renormalize exactly so the mixture weights sum to 1
        let proportions = proportions.iter().map(|p| p / total).collect();
        Ok(AlternativeSpec {
            densities,
            proportions,
        })
    }

    pub fn k(&self) -> usize {
        self.densities.len()
    }

    pub fn dim(&self) -> usize {
        self.densities[0].dim()
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn density(&self, s: usize) -> &dyn Density {
        self.densities[s].as_ref()
    }

    /// Posterior weights out_s = w_s f_s(x) / sum_a w_a f_a(x), computed in
    /// log space so arbitrarily separated densities stay stable.
    pub fn posterior_into(&self, weights: &[f64], x: &[f64], out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(weights.len(), self.k());
        debug_assert_eq!(out.len(), self.k());
        let mut max_log = f64::NEG_INFINITY;
        for (s, f) in self.densities.iter().enumerate() {
            let l = weights[s].ln() + f.log_density(x);
            if !l.is_nan() {
                max_log = max_log.max(l);
            }
            out[s] = l;
        }
        if !max_log.is_finite() {
            return Err(Error::Numeric(
                "mixture density is zero at an evaluation point".into(),
            ));
        }
        let mut denom = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max_log).exp();
            denom += *o;
        }
        for o in out.iter_mut() {
            *o /= denom;
        }
        Ok(())
    }

    /// Draws Z from the mixture with the given weights.
    pub fn sample_mixture_into(
        &self,
        weights: &[f64],
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut component = self.k() - 1;
        for (s, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                component = s;
                break;
            }
        }
        self.densities[component].sample_into(rng, out);
    }
}

/// Streams posterior-weight vectors of mixture draws to a visitor, in
/// deterministic chunk order.
fn mixture_sweep(
    spec: &AlternativeSpec,
    mc_samples: usize,
    seed: u64,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    if mc_samples < 1 {
        return Err(Error::InvalidInput(
            "Monte-Carlo sample count must be at least 1".into(),
        ));
    }
    let k = spec.k();
    let mut point = vec![0.0; spec.dim()];
    let mut g = vec![0.0; k];
    let mut chunk_idx = 0u64;
    let mut remaining = mc_samples;
    while remaining > 0 {
        let this_chunk = remaining.min(MC_CHUNK);
        let mut rng = substream(seed, chunk_idx);
        for _ in 0..this_chunk {
            spec.sample_mixture_into(spec.proportions(), &mut rng, &mut point);
            spec.posterior_into(spec.proportions(), &point, &mut g)?;
            visit(chunk_idx as usize, &g);
        }
        chunk_idx += 1;
        remaining -= this_chunk;
    }
    Ok(())
}

/// Monte-Carlo estimate of the almost-sure limit H of A_N / N, with
/// standard errors.
#[derive(Debug, Clone)]
pub struct HMatrix {
    pub h: Matrix,
    pub standard_errors: Matrix,
    /// 1/2 - trace(H), the dissimilarity aggregate the MCM statistic
    /// converges to (divided by N).
    pub aggregate: f64,
    pub mc_samples: usize,
}

/// Estimates h_st = E[g_s g_t] for s != t and h_ss = E[g_s^2] / 2.
pub fn h_matrix(spec: &AlternativeSpec, mc_samples: usize, seed: u64) -> Result<HMatrix> {
    let k = spec.k();
    let mut sum = Matrix::zeros(k, k);
    let mut sumsq = Matrix::zeros(k, k);
    mixture_sweep(spec, mc_samples, seed, |_, g| {
        for s in 0..k {
            for t in s..k {
                let v = if s == t {
                    0.5 * g[s] * g[s]
                } else {
                    g[s] * g[t]
                };
                sum[(s, t)] += v;
                sumsq[(s, t)] += v * v;
            }
        }
    })?;
    let n = mc_samples as f64;
    let mut h = Matrix::zeros(k, k);
    let mut se = Matrix::zeros(k, k);
    for s in 0..k {
        for t in s..k {
            let mean = sum[(s, t)] / n;
            let var = (sumsq[(s, t)] / n - mean * mean).max(0.0);
            let e = (var / n).sqrt();
            h[(s, t)] = mean;
            h[(t, s)] = mean;
            se[(s, t)] = e;
            se[(t, s)] = e;
        }
    }
    let aggregate = 0.5 - (0..k).map(|s| h[(s, s)]).sum::<f64>();
    Ok(HMatrix {
        h,
        standard_errors: se,
        aggregate,
        mc_samples,
    })
}

/// The aggregate 1/2 - trace(H). Equals the sum of the upper-triangular
/// entries of H up to float rounding.
pub fn hp_aggregate(h: &HMatrix) -> f64 {
    h.aggregate
}

/// Monte-Carlo estimate of the Henze-Penrose divergence
/// delta = E[g_1^2 + g_2^2] between two densities, with standard error.
pub fn henze_penrose(spec: &AlternativeSpec, mc_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if spec.k() != 2 {
        return Err(Error::Unsupported(
            "the Henze-Penrose divergence is defined for two densities".into(),
        ));
    }
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    mixture_sweep(spec, mc_samples, seed, |_, g| {
        let v = g[0] * g[0] + g[1] * g[1];
        sum += v;
        sumsq += v * v;
    })?;
    let n = mc_samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Pooled draw from the bootstrap alternative: Z_j i.i.d. from the mixture
/// phi_N = sum (N_s/N) f_s with labels assigned by posterior probability.
/// The realized group counts eta are free to differ from the target sizes.
#[derive(Debug, Clone)]
pub struct BootstrapSample {
    pub points: PointCloud,
    pub labels: Vec<usize>,
    pub eta: Vec<usize>,
}

pub fn bootstrap_sample(
    spec: &AlternativeSpec,
    sizes: &GroupSizes,
    seed: u64,
) -> Result<BootstrapSample> {
    if sizes.k() != spec.k() {
        return Err(Error::InvalidInput(format!(
            "{} group sizes for {} densities",
            sizes.k(),
            spec.k()
        )));
    }
    let n = sizes.n();
    let k = spec.k();
    let d = spec.dim();
    let weights: Vec<f64> = sizes.sizes().iter().map(|&s| s as f64 / n as f64).collect();
    let mut rng = substream(seed, 0);
    let mut data = vec![0.0; n * d];
    let mut labels = Vec::with_capacity(n);
    let mut eta = vec![0usize; k];
    let mut g = vec![0.0; k];
    for j in 0..n {
        let row = &mut data[j * d..(j + 1) * d];
        spec.sample_mixture_into(&weights, &mut rng, row);
        spec.posterior_into(&weights, row, &mut g)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut label = k - 1;
        for (s, &w) in g.iter().enumerate() {
            acc += w;
            if u < acc {
                label = s;
                break;
            }
        }
        labels.push(label);
        eta[label] += 1;
    }
    Ok(BootstrapSample {
        points: PointCloud::new(data, n, d)?,
        labels,
        eta,
    })
}

/// Conditional means mu_N(s, t) of the counts given the pooled sample:
/// sums over the realized matched edges of the pair-probability kernel
/// h_st(x, y) + h_st(y, x) (cross) and h_ss(x, y) (pure).
pub fn conditional_mean_mu(
    pooled: &PointCloud,
    matching: &Matching,
    spec: &AlternativeSpec,
    sizes: &GroupSizes,
) -> Result<Matrix> {
    if sizes.k() != spec.k() {
        return Err(Error::InvalidInput(format!(
            "{} group sizes for {} densities",
            sizes.k(),
            spec.k()
        )));
    }
    if 2 * matching.num_pairs() != pooled.n() {
        return Err(Error::InvalidInput(
            "matching does not cover the pooled sample".into(),
        ));
    }
    let n = sizes.n();
    let k = spec.k();
    let weights: Vec<f64> = sizes.sizes().iter().map(|&s| s as f64 / n as f64).collect();
    let mut mu = Matrix::zeros(k, k);
    let mut gx = vec![0.0; k];
    let mut gy = vec![0.0; k];
    for &(i, j) in matching.pairs() {
        spec.posterior_into(&weights, pooled.row(i), &mut gx)?;
        spec.posterior_into(&weights, pooled.row(j), &mut gy)?;
        for s in 0..k {
            mu[(s, s)] += gx[s] * gy[s];
            for t in (s + 1)..k {
                let v = gx[s] * gy[t] + gx[t] * gy[s];
                mu[(s, t)] += v;
                mu[(t, s)] += v;
            }
        }
    }
    Ok(mu)
}

/// Upper-triangular entries of a K x K matrix in canonical pair order.
pub fn cross_entries(m: &Matrix) -> Vec<f64> {
    pair_order(m.rows())
        .into_iter()
        .map(|(s, t)| m[(s, t)])
        .collect()
}

/// The covariance blocks of the limiting joint law of cross counts and
/// label counts, and the resulting limit Gamma of Cov(vec A_N | pooled)/N
/// under general alternatives.
#[derive(Debug, Clone)]
pub struct GammaMatrices {
    pub q11: Matrix,
    pub q12: Matrix,
    pub q22: Matrix,
    pub gamma: Matrix,
    /// Batch-means standard errors for the entries of gamma.
    pub gamma_se: Matrix,
    /// Conditional label-count covariance block (diagnostic).
    pub r22: Matrix,
    /// Covariance of the posterior weights (diagnostic); q22 = r22 + this.
    pub posterior_cov: Matrix,
    pub mc_samples: usize,
}

/// Estimates Q11, Q12 by mixture sampling (Q22 is exact in the
/// proportions) and assembles Gamma = Q11 - Q12 Q22^{-1} Q12'.
pub fn gamma_matrices(spec: &AlternativeSpec, mc_samples: usize, seed: u64) -> Result<GammaMatrices> {
    let k = spec.k();
    let p = spec.proportions().to_vec();
    let pairs = pair_order(k);
    let q = pairs.len();
    let km1 = k - 1;

    // accumulators: full-run sums and per-chunk sums for batch means
    let mut q11_sum = Matrix::zeros(q, q);
    let mut q12_sum = Matrix::zeros(q, km1);
    let mut g1_sum = vec![0.0; k];
    let mut g2_sum = Matrix::zeros(k, k);
    let mut chunks: Vec<(Matrix, Matrix, usize)> = Vec::new();
    let mut hbar = vec![0.0; q];

    mixture_sweep(spec, mc_samples, seed, |chunk_idx, g| {
        if chunks.len() <= chunk_idx {
            chunks.push((Matrix::zeros(q, q), Matrix::zeros(q, km1), 0));
        }
        let (c11, c12, count) = &mut chunks[chunk_idx];
        for (idx, &(s, t)) in pairs.iter().enumerate() {
            hbar[idx] = 2.0 * g[s] * g[t];
        }
        for a in 0..q {
            for b in a..q {
                let v = if a == b {
                    0.5 * hbar[a] * (1.0 - hbar[a])
                } else {
                    -0.5 * hbar[a] * hbar[b]
                };
                q11_sum[(a, b)] += v;
                c11[(a, b)] += v;
            }
            let (s, t) = pairs[a];
            for u in 0..km1 {
                let v = if u == s || u == t {
                    0.5 * hbar[a] * (1.0 - 2.0 * g[u])
                } else {
                    -hbar[a] * g[u]
                };
                q12_sum[(a, u)] += v;
                c12[(a, u)] += v;
            }
        }
        for s in 0..k {
            g1_sum[s] += g[s];
            for t in s..k {
                g2_sum[(s, t)] += g[s] * g[t];
            }
        }
        *count += 1;
    })?;

    let n = mc_samples as f64;
    let symmetrize = |m: &mut Matrix| {
        for a in 0..m.rows() {
            for b in (a + 1)..m.cols() {
                m[(b, a)] = m[(a, b)];
            }
        }
    };
    let mut q11 = Matrix::zeros(q, q);
    for a in 0..q {
        for b in a..q {
            q11[(a, b)] = q11_sum[(a, b)] / n;
        }
    }
    symmetrize(&mut q11);
    let mut q12 = Matrix::zeros(q, km1);
    for a in 0..q {
        for u in 0..km1 {
            q12[(a, u)] = q12_sum[(a, u)] / n;
        }
    }

    // Q22 is the multinomial covariance of the first K-1 label indicators
    let mut q22 = Matrix::zeros(km1, km1);
    for s in 0..km1 {
        for t in 0..km1 {
            q22[(s, t)] = if s == t {
                p[s] * (1.0 - p[s])
            } else {
                -p[s] * p[t]
            };
        }
    }

    let gamma = schur_complement(&q11, &q12, &q22)?;

    // diagnostics: R22 and the posterior covariance, with Q22 = R22 + M
    let mut r22 = Matrix::zeros(km1, km1);
    let mut posterior_cov = Matrix::zeros(km1, km1);
    for s in 0..km1 {
        for t in s..km1 {
            let second = g2_sum[(s, t)] / n;
            if s == t {
                r22[(s, t)] = g1_sum[s] / n - second;
                posterior_cov[(s, t)] = second - p[s] * p[s];
            } else {
                r22[(s, t)] = -second;
                posterior_cov[(s, t)] = second - p[s] * p[t];
            }
        }
    }
    symmetrize(&mut r22);
    symmetrize(&mut posterior_cov);

    // batch-means standard errors for gamma
    let mut gamma_se = Matrix::zeros(q, q);
    if chunks.len() >= 2 {
        let mut batch_gammas = Vec::with_capacity(chunks.len());
        for (c11, c12, count) in &chunks {
            let cn = *count as f64;
            let mut b11 = Matrix::zeros(q, q);
            for a in 0..q {
                for b in a..q {
                    b11[(a, b)] = c11[(a, b)] / cn;
                }
            }
            symmetrize(&mut b11);
            let mut b12 = Matrix::zeros(q, km1);
            for a in 0..q {
                for u in 0..km1 {
                    b12[(a, u)] = c12[(a, u)] / cn;
                }
            }
            batch_gammas.push(schur_complement(&b11, &b12, &q22)?);
        }
        let c = chunks.len() as f64;
        for a in 0..q {
            for b in 0..q {
                let mean: f64 = batch_gammas.iter().map(|g| g[(a, b)]).sum::<f64>() / c;
                let var: f64 = batch_gammas
                    .iter()
                    .map(|g| (g[(a, b)] - mean) * (g[(a, b)] - mean))
                    .sum::<f64>()
                    / (c - 1.0);
                gamma_se[(a, b)] = (var / c).sqrt();
            }
        }
    }

    Ok(GammaMatrices {
        q11,
        q12,
        q22,
        gamma,
        gamma_se,
        r22,
        posterior_cov,
        mc_samples,
    })
}

/// Q11 - Q12 Q22^{-1} Q12', solved column by column against the Cholesky
/// factor of Q22.
fn schur_complement(q11: &Matrix, q12: &Matrix, q22: &Matrix) -> Result<Matrix> {
    let q = q11.rows();
    let km1 = q22.rows();
    let chol = q22
        .cholesky()
        .map_err(|e| Error::Numeric(format!("Q22 must be positive definite: {}", e)))?;
    // X = Q22^{-1} Q12' has shape (K-1) x q
    let mut x = Matrix::zeros(km1, q);
    let mut col = vec![0.0; km1];
    for a in 0..q {
        for u in 0..km1 {
            col[u] = q12[(a, u)];
        }
        let sol = cholesky_solve(&chol, &col);
        for u in 0..km1 {
            x[(u, a)] = sol[u];
        }
    }
    let correction = q12.matmul(&x)?;
    let mut gamma = q11.sub(&correction)?;
    for a in 0..q {
        for b in (a + 1)..q {
            let v = 0.5 * (gamma[(a, b)] + gamma[(b, a)]);
            gamma[(a, b)] = v;
            gamma[(b, a)] = v;
        }
    }
    Ok(gamma)
}

/// Two-sample limiting variance of the centered cross count,
/// gamma^2 = p1 p2 { I1 - I2^2 } in the two mixture integrals, estimated on
/// shared mixture draws. Returns the estimate and a batch-means standard
/// error.
#[derive(Debug, Clone, Copy)]
pub struct Gamma2 {
    pub value: f64,
    pub standard_error: f64,
    /// E[g1 g2 (g1^2 + g2^2)] / (p1 p2), the first integral.
    pub integral_1: f64,
    /// E[g1 g2 (g2 - g1)] / (p1 p2), the second integral.
    pub integral_2: f64,
}

pub fn gamma2_two_sample(spec: &AlternativeSpec, mc_samples: usize, seed: u64) -> Result<Gamma2> {
    if spec.k() != 2 {
        return Err(Error::Unsupported(
            "gamma^2 is the two-sample specialization".into(),
        ));
    }
    let p1 = spec.proportions()[0];
    let p2 = spec.proportions()[1];
    let mut a_sum = 0.0;
    let mut b_sum = 0.0;
    let mut chunk_stats: Vec<(f64, f64, usize)> = Vec::new();
    mixture_sweep(spec, mc_samples, seed, |chunk_idx, g| {
        if chunk_stats.len() <= chunk_idx {
            chunk_stats.push((0.0, 0.0, 0));
        }
        let a = g[0] * g[1] * (g[0] * g[0] + g[1] * g[1]);
        let b = g[0] * g[1] * (g[1] - g[0]);
        a_sum += a;
        b_sum += b;
        let c = &mut chunk_stats[chunk_idx];
        c.0 += a;
        c.1 += b;
        c.2 += 1;
    })?;
    let n = mc_samples as f64;
    let a_mean = a_sum / n;
    let b_mean = b_sum / n;
    let value = a_mean - b_mean * b_mean / (p1 * p2);
    let standard_error = if chunk_stats.len() >= 2 {
        let c = chunk_stats.len() as f64;
        let vals: Vec<f64> = chunk_stats
            .iter()
            .map(|&(a, b, cnt)| {
                let am = a / cnt as f64;
                let bm = b / cnt as f64;
                am - bm * bm / (p1 * p2)
            })
            .collect();
        let mean: f64 = vals.iter().sum::<f64>() / c;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (c - 1.0);
        (var / c).sqrt()
    } else {
        0.0
    };
    Ok(Gamma2 {
        value,
        standard_error,
        integral_1: a_mean / (p1 * p2),
        integral_2: b_mean / (p1 * p2),
    })
}

/// One replicate of the two-sample conditional CLT check: draws the groups
/// from their densities, matches the pooled sample, and returns
/// (R - E[R | pooled]) / sqrt(N).
pub fn clt_replicate(
    spec: &AlternativeSpec,
    sizes: &GroupSizes,
    seed: u64,
    replicate: u64,
) -> Result<f64> {
    if spec.k() != 2 || sizes.k() != 2 {
        return Err(Error::Unsupported(
            "the conditional CLT check covers the two-sample case".into(),
        ));
    }
    let n = sizes.n();
    let d = spec.dim();
    let mut rng = substream(seed, replicate);
    let mut data = vec![0.0; n * d];
    let mut row_idx = 0;
    for (s, &ns) in sizes.sizes().iter().enumerate() {
        for _ in 0..ns {
            spec.density(s)
                .sample_into(&mut rng, &mut data[row_idx * d..(row_idx + 1) * d]);
            row_idx += 1;
        }
    }
    let pooled = PointCloud::new(data, n, d)?;
    let distances = pairwise_distances(&pooled, Metric::Euclidean);
    let matching = min_nonbipartite_matching(&distances)?;
    let observed = matching
        .pairs()
        .iter()
        .filter(|&&(i, j)| (i < sizes.sizes()[0]) != (j < sizes.sizes()[0]))
        .count() as f64;
    let mu = conditional_mean_mu(&pooled, &matching, spec, sizes)?;
    Ok((observed - mu[(0, 1)]) / (n as f64).sqrt())
}

/// Distribution comparison of the centered, scaled cross count against its
/// normal limit.
#[derive(Debug, Clone)]
pub struct CltReport {
    pub replicates: usize,
    pub mean_centered: f64,
    pub sd_centered: f64,
    pub gamma2: Gamma2,
    /// KS distance between the standardized replicates and N(0, 1).
    pub ks_distance: f64,
}

/// Simulates `replicates` two-sample datasets, centers the cross count by
/// its conditional mean, and compares the scaled values to N(0, gamma^2).
pub fn clt_diagnostic(
    spec: &AlternativeSpec,
    sizes: &GroupSizes,
    replicates: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<CltReport> {
    if replicates < 1 {
        return Err(Error::InvalidInput("need at least 1 replicate".into()));
    }
    let mut values = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        values.push(clt_replicate(spec, sizes, seed, rep as u64)?);
    }
    summarize_clt(spec, sizes, &values, mc_samples, seed)
}

/// Assembles the CLT report from precomputed centered replicate values
/// (entry point for parallel drivers; `values[i]` must come from
/// `clt_replicate(spec, sizes, seed, i)`).
pub fn summarize_clt(
    spec: &AlternativeSpec,
    sizes: &GroupSizes,
    values: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<CltReport> {
    let _ = sizes;
    let gamma2 = gamma2_two_sample(spec, mc_samples, substream_tag(seed))?;
    if gamma2.value <= 0.0 {
        return Err(Error::Numeric(
            "estimated gamma^2 is not positive; densities may coincide with zero overlap".into(),
        ));
    }
    let sd = gamma2.value.sqrt();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let standardized: Vec<f64> = values.iter().map(|v| v / sd).collect();
    let ks = ks_statistic(&standardized, normal_cdf);
    Ok(CltReport {
        replicates: values.len(),
        mean_centered: mean,
        sd_centered: var.sqrt(),
        gamma2,
        ks_distance: ks,
    })
}

/// Stream index reserved for the gamma^2 estimate inside the CLT check so
/// it never collides with replicate streams.
fn substream_tag(seed: u64) -> u64 {
    seed ^ 0x5DEE_CE66_D154_21C5
}
