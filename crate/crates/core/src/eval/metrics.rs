use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::conformal::{CalibratedRegion, Observation};
use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance};

/// Fraction of posterior draws inside the region at the observation.
pub fn conditional_coverage(
    region: &CalibratedRegion,
    obs: &Observation,
    draws: ArrayView2<f64>,
) -> Result<f64> {
    let scores = obs.score_at().score_rows(draws)?;
    Ok(coverage_of_scores(&scores, region.cutoff_in(obs)?))
}

pub(crate) fn coverage_of_scores(scores: &[f64], cutoff: f64) -> f64 {
    scores.iter().filter(|&&s| s <= cutoff).count() as f64 / scores.len() as f64
}

/// Mean absolute deviation of conditional coverages from `1 − α`.
pub fn mae(coverages: &[f64], alpha: f64) -> Result<f64> {
    if coverages.is_empty() {
        return Err(Error::EmptyInput("conditional coverages"));
    }
    Ok(coverages.iter().map(|d| (d - (1.0 - alpha)).abs()).sum::<f64>() / coverages.len() as f64)
}

/// Fraction of held-out pairs with θᵢ inside the region at xᵢ.
pub fn amc(region: &CalibratedRegion, pairs: &[(Observation, Vec<f64>)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("test set"));
    }
    let mut hits = 0usize;
    for (obs, theta) in pairs {
        hits += region.contains_in(obs, theta)? as usize;
    }
    Ok(hits as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Interval {
    /// Fewer than two values: the interval collapses to the point.
    pub fn degenerate(&self) -> bool {
        self.n < 2
    }
}

/// Normal-approximation 95% interval: mean ± 1.96·sd/√n.
pub fn confidence_interval(values: &[f64]) -> Result<Interval> {
    if values.is_empty() {
        return Err(Error::EmptyInput("values"));
    }
    let m = mean(values);
    let n = values.len();
    let half = if n < 2 {
        0.0
    } else {
        1.96 * sample_variance(values).sqrt() / (n as f64).sqrt()
    };
    Ok(Interval {
        mean: m,
        lo: m - half,
        hi: m + half,
        n,
    })
}

/// Kolmogorov–Smirnov distance between the sample and Uniform(0, 1).
pub fn ks_uniform_statistic(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("values"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(v.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let x = x.clamp(0.0, 1.0);
        d.max((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
    }))
}

/// Asymptotic p-value of the KS statistic `d` at sample size `n`, with
/// Stephens' small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}
