//! Convergence diagnostics: moments, Gaussian goodness of fit and ε-sweeps.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, Discrete, Poisson};

use crate::error::{Result, RevolveError};
use crate::limits::{gaussian_law_at, min_eigenvalue, DiffusionLimit};
use crate::simulator::{simulate_ensemble_with, EndpointEnsemble, EnsembleOptions, EvolutionConfig};
use crate::sphere::sample_direction;

/// Target law of the endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let n = mean.len();
        if covariance.len() != n || covariance.iter().any(|r| r.len() != n) {
            return Err(RevolveError::DimensionMismatch {
                expected: n,
                found: covariance.len(),
            });
        }
        for i in 0..n {
            for j in 0..i {
                if (covariance[i][j] - covariance[j][i]).abs() > 1e-10 {
                    return Err(RevolveError::Domain("covariance is not symmetric".into()));
                }
            }
        }
        if min_eigenvalue(&covariance) < -1e-10 {
            return Err(RevolveError::Domain("covariance is not positive semidefinite".into()));
        }
        Ok(GaussianSpec { mean, covariance })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSummary {
    pub n_samples: usize,
    pub mean: Vec<f64>,
    /// Unbiased sample covariance.
    pub covariance: Vec<Vec<f64>>,
    pub mean_se: Vec<f64>,
    /// `sqrt((m4_ij - cov_ij²) / n)` with `m4_ij = E[(x_i - m_i)² (x_j - m_j)²]`.
    pub covariance_se: Vec<Vec<f64>>,
}

/// Moments of `rows` (each of length `dimension`), summed in row order.
pub fn summarize_rows<'a, I>(dimension: usize, rows: I) -> Result<MomentSummary>
where
    I: IntoIterator<Item = &'a [f64]> + Clone,
{
    let n = dimension;
    let mut count = 0usize;
    let mut sum = vec![0.0; n];
    for row in rows.clone() {
        if row.len() != n {
            return Err(RevolveError::DimensionMismatch { expected: n, found: row.len() });
        }
        sum.iter_mut().zip(row).for_each(|(s, x)| *s += x);
        count += 1;
    }
    if count < 2 {
        return Err(RevolveError::Domain(format!("need at least 2 samples, got {count}")));
    }
    let m = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let mut cross = vec![vec![0.0; n]; n];
    let mut fourth = vec![vec![0.0; n]; n];
    let mut centered = vec![0.0; n];
    for row in rows {
        centered.iter_mut().zip(row.iter().zip(&mean)).for_each(|(c, (x, mu))| *c = x - mu);
        for i in 0..n {
            for j in i..n {
                let p = centered[i] * centered[j];
                cross[i][j] += p;
                fourth[i][j] += p * p;
            }
        }
    }
    let mut covariance = vec![vec![0.0; n]; n];
    let mut covariance_se = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let cov = cross[i][j] / (m - 1.0);
            let biased = cross[i][j] / m;
            let se = ((fourth[i][j] / m - biased * biased).max(0.0) / m).sqrt();
            covariance[i][j] = cov;
            covariance[j][i] = cov;
            covariance_se[i][j] = se;
            covariance_se[j][i] = se;
        }
    }
    let mean_se = (0..n).map(|i| (covariance[i][i] / m).sqrt()).collect();
    Ok(MomentSummary {
        n_samples: count,
        mean,
        covariance,
        mean_se,
        covariance_se,
    })
}

pub fn summarize(ensemble: &EndpointEnsemble) -> Result<MomentSummary> {
    summarize_rows(ensemble.dimension, ensemble.points.chunks_exact(ensemble.dimension))
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-2.0 * k * k * lambda * lambda).exp();
        total += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    total.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of `sample` against `cdf`; the p-value uses the
/// Stephens small-sample correction of the Kolmogorov limit law.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / m).max((i + 1) as f64 / m - f);
    }
    let root = m.sqrt();
    KsResult {
        statistic: d,
        p_value: kolmogorov_tail((root + 0.12 + 0.11 / root) * d),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Tested,
    /// Target variance is zero; nothing to compare against.
    Skipped,
    /// Sample has no spread although the target does.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalFit {
    pub statistic: f64,
    pub p_value: f64,
    pub status: FitStatus,
}

impl MarginalFit {
    pub fn passes(&self, alpha: f64) -> bool {
        match self.status {
            FitStatus::Tested => self.p_value > alpha,
            FitStatus::Skipped => true,
            FitStatus::Degenerate => false,
        }
    }
}

fn fit_values(values: &[f64], mean: f64, variance: f64) -> Result<MarginalFit> {
    if variance <= 0.0 {
        return Ok(MarginalFit { statistic: 0.0, p_value: 1.0, status: FitStatus::Skipped });
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Ok(MarginalFit { statistic: 1.0, p_value: 0.0, status: FitStatus::Degenerate });
    }
    let normal = Normal::new(mean, variance.sqrt()).map_err(|e| RevolveError::Domain(e.to_string()))?;
    let r = ks_test(values, |x| normal.cdf(x));
    Ok(MarginalFit { statistic: r.statistic, p_value: r.p_value, status: FitStatus::Tested })
}

fn check_target(ensemble: &EndpointEnsemble, target: &GaussianSpec) -> Result<()> {
    if target.dimension() != ensemble.dimension {
        return Err(RevolveError::DimensionMismatch {
            expected: ensemble.dimension,
            found: target.dimension(),
        });
    }
    if ensemble.n_paths() == 0 {
        return Err(RevolveError::Domain("empty ensemble".into()));
    }
    Ok(())
}

/// KS fit of every coordinate against the matching Gaussian marginal.
pub fn ks_marginals(ensemble: &EndpointEnsemble, target: &GaussianSpec) -> Result<Vec<MarginalFit>> {
    check_target(ensemble, target)?;
    (0..ensemble.dimension)
        .map(|i| fit_values(&ensemble.coordinate(i), target.mean[i], target.covariance[i][i]))
        .collect()
}

/// KS fits of `<u, ξ>` for `count` random unit vectors `u`.
pub fn ks_projections(
    ensemble: &EndpointEnsemble,
    target: &GaussianSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<(Vec<f64>, MarginalFit)>> {
    check_target(ensemble, target)?;
    let n = ensemble.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u = sample_direction(n, &mut rng)?.into_components();
            let values: Vec<f64> = ensemble
                .rows()
                .map(|r| r.iter().zip(&u).map(|(x, u)| x * u).sum())
                .collect();
            let mean = u.iter().zip(&target.mean).map(|(u, m)| u * m).sum();
            let mut variance = 0.0;
            for i in 0..n {
                for j in 0..n {
                    variance += u[i] * target.covariance[i][j] * u[j];
                }
            }
            fit_values(&values, mean, variance).map(|fit| (u, fit))
        })
        .collect()
}

/// Pearson chi-squared test of integer counts against `Poisson(mean)`, with
/// bins pooled until each expects at least 5 observations.
pub fn poisson_chi_squared(counts: &[u64], mean: f64) -> Result<KsResult> {
    if counts.is_empty() || !(mean > 0.0) {
        return Err(RevolveError::Domain("need counts and a positive mean".into()));
    }
    let poisson = Poisson::new(mean).map_err(|e| RevolveError::Domain(e.to_string()))?;
    let total = counts.len() as f64;
    let max = *counts.iter().max().unwrap();
    let mut observed = vec![0u64; max as usize + 1];
    counts.iter().for_each(|&k| observed[k as usize] += 1);

    // bins [lo, hi); the last one is open to the right
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut exp_acc, mut obs_acc) = (0.0, 0.0);
    let upper = (mean + 20.0 * mean.sqrt() + 20.0).max(max as f64) as u64;
    for k in 0..=upper {
        exp_acc += total * poisson.pmf(k);
        obs_acc += observed.get(k as usize).copied().unwrap_or(0) as f64;
        if exp_acc >= 5.0 {
            bins.push((exp_acc, obs_acc));
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
    }
    let tail_obs = counts.iter().filter(|&&k| k > upper).count() as f64;
    let tail_exp = total - bins.iter().map(|b| b.0).sum::<f64>();
    match bins.last_mut() {
        Some(last) => {
            last.0 += tail_exp;
            last.1 += obs_acc + tail_obs;
        }
        None => return Err(RevolveError::Domain("too few samples for a chi-squared test".into())),
    }
    if bins.len() < 2 {
        return Err(RevolveError::Domain("too few bins for a chi-squared test".into()));
    }
    let statistic: f64 = bins.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let dist = ChiSquared::new((bins.len() - 1) as f64).map_err(|e| RevolveError::Domain(e.to_string()))?;
    Ok(KsResult { statistic, p_value: 1.0 - dist.cdf(statistic) })
}

/// Log-log least-squares fit `log m = slope · log ε + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub eps_values: Vec<f64>,
    pub metric_values: Vec<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    /// Every metric is at roundoff level, so there is no rate to fit.
    pub exact: bool,
    /// Indices into `eps_values` used by the fit (inclusive start, exclusive end).
    pub fit_range: (usize, usize),
    pub plateau_detected: bool,
}

const EXACT_LEVEL: f64 = 1e-14;

pub fn fit_power_law(eps_values: &[f64], metric_values: &[f64]) -> RateFit {
    let range = (0, eps_values.len().min(metric_values.len()));
    fit_range(eps_values, metric_values, range, false)
}

fn fit_range(eps_values: &[f64], metric_values: &[f64], range: (usize, usize), plateau: bool) -> RateFit {
    let exact = metric_values.iter().all(|m| m.abs() < EXACT_LEVEL);
    let points: Vec<(f64, f64)> = (range.0..range.1)
        .filter(|&i| eps_values[i] > 0.0 && metric_values[i] > 0.0)
        .map(|i| (eps_values[i].ln(), metric_values[i].ln()))
        .collect();
    let mut fit = RateFit {
        eps_values: eps_values.to_vec(),
        metric_values: metric_values.to_vec(),
        slope: None,
        intercept: None,
        r_squared: None,
        exact,
        fit_range: range,
        plateau_detected: plateau,
    };
    if exact || points.len() < 2 {
        return fit;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return fit;
    }
    let slope = sxy / sxx;
    fit.slope = Some(slope);
    fit.intercept = Some(my - slope * mx);
    fit.r_squared = Some(if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) });
    fit
}

/// Distance between sample moments and the limit law at the horizon.
pub fn limit_distance(summary: &MomentSummary, target: &GaussianSpec) -> f64 {
    let n = target.dimension();
    let mut frob = 0.0;
    let mut mean = 0.0;
    for i in 0..n {
        mean += (summary.mean[i] - target.mean[i]).powi(2);
        for j in 0..n {
            frob += (summary.covariance[i][j] - target.covariance[i][j]).powi(2);
        }
    }
    frob.sqrt() + mean.sqrt()
}

/// Monte-Carlo standard error of [`limit_distance`] at the target.
pub fn distance_noise(summary: &MomentSummary) -> f64 {
    let frob: f64 = summary.covariance_se.iter().flatten().map(|s| s * s).sum();
    let mean: f64 = summary.mean_se.iter().map(|s| s * s).sum();
    frob.sqrt() + mean.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub seed: u64,
    pub metric: f64,
    pub noise: f64,
    pub ks_pvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSweep {
    pub points: Vec<SweepPoint>,
    pub fit: RateFit,
}

/// Points whose metric is below this many noise units count as plateaued.
pub const NOISE_FLOOR_FACTOR: f64 = 3.0;

/// Simulates `base` at every ε (seed `base.seed + i` for the i-th) and fits
/// the distance to the limit law against ε.
pub fn convergence_sweep(
    base: &EvolutionConfig,
    eps_list: &[f64],
    limit: &DiffusionLimit,
    workers: Option<usize>,
) -> Result<ConvergenceSweep> {
    if eps_list.len() < 4 {
        return Err(RevolveError::config("eps_list", "needs at least 4 values"));
    }
    let (lo, hi) = eps_list
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if !(lo > 0.0) || hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(RevolveError::config("eps_list", "values must be positive and span a decade"));
    }
    let target = gaussian_law_at(limit, base.horizon, &base.x0)?;
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&a, &b| eps_list[b].total_cmp(&eps_list[a]));

    let mut points = Vec::with_capacity(eps_list.len());
    for (i, &eps) in eps_list.iter().enumerate() {
        let mut config = base.clone();
        config.epsilon = eps;
        config.seed = base.seed.wrapping_add(i as u64);
        let options = EnsembleOptions { workers, ..Default::default() };
        let (ensemble, _) = simulate_ensemble_with(&config, options)?;
        let summary = summarize(&ensemble)?;
        let ks = ks_marginals(&ensemble, &target)?;
        points.push(SweepPoint {
            eps,
            seed: config.seed,
            metric: limit_distance(&summary, &target),
            noise: distance_noise(&summary),
            ks_pvalues: ks.iter().map(|f| f.p_value).collect(),
        });
    }

    // walk from the largest ε down; the fit stops at the first plateaued point
    let eps_sorted: Vec<f64> = order.iter().map(|&i| points[i].eps).collect();
    let metric_sorted: Vec<f64> = order.iter().map(|&i| points[i].metric).collect();
    let resolved = order
        .iter()
        .take_while(|&&i| points[i].metric > NOISE_FLOOR_FACTOR * points[i].noise)
        .count();
    let fit = if resolved == order.len() {
        fit_power_law(&eps_sorted, &metric_sorted)
    } else if resolved >= 2 {
        fit_range(&eps_sorted, &metric_sorted, (0, resolved), true)
    } else {
        fit_range(&eps_sorted, &metric_sorted, (0, order.len()), true)
    };
    Ok(ConvergenceSweep { points, fit })
}

/// Sample covariance of `rows` as a matrix.
pub fn covariance_matrix(summary: &MomentSummary) -> DMatrix<f64> {
    let n = summary.mean.len();
    DMatrix::from_fn(n, n, |i, j| summary.covariance[i][j])
}
