//! Benchmark simulators with tractable oracle posteriors.
//!
//! | task                  | θ dim | x dim | prior                 | oracle                    |
//! |-----------------------|-------|-------|-----------------------|---------------------------|
//! | TwoMoons              | 2     | 2     | U[-1,1]²              | grid + importance resampling |
//! | GaussianLinear        | 10    | 10    | N(0, 0.1 I)           | conjugate Gaussian        |
//! | GaussianLinearUniform | 10    | 10    | U[-1,1]¹⁰             | truncated Gaussian        |
//! | GaussianMixture       | 2     | 2     | U[-3,3]²              | grid + importance resampling |
//! | Heteroskedastic       | 1     | 2     | N(0, 1)               | conjugate Gaussian        |
//!
//! `Heteroskedastic` is a diagnostic task: `x₁` carries no information about
//! θ but switches the posterior scale, so posterior spread differs by a fixed
//! factor across the sign of `x₁`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::dist::{DiagGaussian, Dist, TruncatedDiagGaussian};
use crate::error::{check_dim, Error, Result};
use crate::grid::{GridPosterior, GridTarget};
use crate::rng::Rng;
use crate::stats::{std_normal_ln_pdf, LN_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskName {
    TwoMoons,
    GaussianLinear,
    GaussianLinearUniform,
    GaussianMixture,
    Heteroskedastic,
}

impl TaskName {
    /// The four benchmark tasks of the standard sweep.
    pub const BENCHMARK: [TaskName; 4] = [
        TaskName::TwoMoons,
        TaskName::GaussianLinear,
        TaskName::GaussianLinearUniform,
        TaskName::GaussianMixture,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::TwoMoons => "TwoMoons",
            TaskName::GaussianLinear => "GaussianLinear",
            TaskName::GaussianLinearUniform => "GaussianLinearUniform",
            TaskName::GaussianMixture => "GaussianMixture",
            TaskName::Heteroskedastic => "Heteroskedastic",
        }
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            TaskName::TwoMoons,
            TaskName::GaussianLinear,
            TaskName::GaussianLinearUniform,
            TaskName::GaussianMixture,
            TaskName::Heteroskedastic,
        ]
        .into_iter()
        .find(|t| t.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::InvalidArgument(format!("unknown task `{s}`")))
    }
}

/// Simulator constants and oracle settings. Every task reads only its own fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    /// Parameter (and observation) dimension of the Gaussian linear tasks.
    pub dim: usize,
    pub prior_var: f64,
    pub noise_var: f64,
    pub uniform_bound: f64,
    pub moons_bound: f64,
    pub moons_radius_mean: f64,
    pub moons_radius_sd: f64,
    pub moons_offset: f64,
    pub mixture_bound: f64,
    pub mixture_factor: f64,
    pub mixture_broad_var: f64,
    pub mixture_narrow_var: f64,
    pub hetero_prior_var: f64,
    /// Posterior standard deviation when `x₁ ≤ 0`.
    pub hetero_posterior_sd: f64,
    /// Posterior standard deviation ratio between `x₁ > 0` and `x₁ ≤ 0`.
    pub hetero_scale_ratio: f64,
    pub grid_resolution: usize,
    /// Proposal pool size per requested draw in grid importance resampling.
    pub importance_pool: usize,
    /// Proposal cap per draw for truncated-Gaussian rejection sampling.
    pub rejection_cap: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            dim: 10,
            prior_var: 0.1,
            noise_var: 0.1,
            uniform_bound: 1.0,
            moons_bound: 1.0,
            moons_radius_mean: 0.1,
            moons_radius_sd: 0.01,
            moons_offset: 0.25,
            mixture_bound: 3.0,
            mixture_factor: 0.8,
            mixture_broad_var: 1.0,
            mixture_narrow_var: 0.01,
            hetero_prior_var: 1.0,
            hetero_posterior_sd: 0.1,
            hetero_scale_ratio: 3.0,
            grid_resolution: 512,
            importance_pool: 4,
            rejection_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: TaskName,
    pub config: TaskConfig,
}

/// Contraction `γ` and shift `δ` applied to a posterior around its mean.
/// `γ = 1, δ = 0` is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub gamma: f64,
    pub shift: Vec<f64>,
}

impl Distortion {
    pub fn identity() -> Self {
        Distortion {
            gamma: 1.0,
            shift: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.gamma == 1.0 && self.shift.iter().all(|&s| s == 0.0)
    }

    fn shift_at(&self, i: usize) -> f64 {
        self.shift.get(i).copied().unwrap_or(0.0)
    }
}

/// A log density value, flagged when it omits the normalizing constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDensity {
    pub value: f64,
    pub normalized: bool,
}

/// Joint draws (θᵢ, xᵢ), one row per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    pub theta: Array2<f64>,
    pub x: Array2<f64>,
}

impl Task {
    pub fn new(name: TaskName) -> Self {
        Task {
            name,
            config: TaskConfig::default(),
        }
    }

    pub fn with_config(name: TaskName, config: TaskConfig) -> Result<Self> {
        let task = Task { name, config };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        let positive = [
            ("prior_var", c.prior_var),
            ("noise_var", c.noise_var),
            ("uniform_bound", c.uniform_bound),
            ("moons_bound", c.moons_bound),
            ("moons_radius_sd", c.moons_radius_sd),
            ("mixture_bound", c.mixture_bound),
            ("mixture_factor", c.mixture_factor),
            ("mixture_broad_var", c.mixture_broad_var),
            ("mixture_narrow_var", c.mixture_narrow_var),
            ("hetero_prior_var", c.hetero_prior_var),
            ("hetero_posterior_sd", c.hetero_posterior_sd),
            ("hetero_scale_ratio", c.hetero_scale_ratio),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::InvalidArgument(format!("task.{k} must be positive")));
        }
        if c.dim == 0 || c.grid_resolution < 2 || c.importance_pool == 0 || c.rejection_cap == 0 {
            return Err(Error::InvalidArgument(
                "task.dim, task.importance_pool and task.rejection_cap must be positive; \
                 task.grid_resolution at least 2"
                    .into(),
            ));
        }
        let hi_sd = c.hetero_posterior_sd * c.hetero_scale_ratio;
        if self.name == TaskName::Heteroskedastic
            && c.hetero_posterior_sd.max(hi_sd).powi(2) >= c.hetero_prior_var
        {
            return Err(Error::InvalidArgument(
                "heteroskedastic posterior variance must stay below the prior variance".into(),
            ));
        }
        Ok(())
    }

    pub fn theta_dim(&self) -> usize {
        match self.name {
            TaskName::TwoMoons | TaskName::GaussianMixture => 2,
            TaskName::GaussianLinear | TaskName::GaussianLinearUniform => self.config.dim,
            TaskName::Heteroskedastic => 1,
        }
    }

    pub fn x_dim(&self) -> usize {
        match self.name {
            TaskName::TwoMoons | TaskName::GaussianMixture | TaskName::Heteroskedastic => 2,
            TaskName::GaussianLinear | TaskName::GaussianLinearUniform => self.config.dim,
        }
    }

    /// Bounds of a uniform prior; `None` for Gaussian priors.
    pub fn prior_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let b = match self.name {
            TaskName::TwoMoons => self.config.moons_bound,
            TaskName::GaussianLinearUniform => self.config.uniform_bound,
            TaskName::GaussianMixture => self.config.mixture_bound,
            TaskName::GaussianLinear | TaskName::Heteroskedastic => return None,
        };
        let d = self.theta_dim();
        Some((vec![-b; d], vec![b; d]))
    }

    pub fn in_prior_support(&self, theta: &[f64]) -> bool {
        match self.prior_box() {
            Some((lo, hi)) => theta
                .iter()
                .zip(lo.iter().zip(&hi))
                .all(|(t, (l, h))| t >= l && t <= h),
            None => true,
        }
    }

    pub fn log_prior(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.theta_dim(), theta.len())?;
        Ok(match self.prior_box() {
            Some((lo, hi)) => {
                if self.in_prior_support(theta) {
                    -lo.iter().zip(&hi).map(|(l, h)| (h - l).ln()).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            }
            None => {
                let var = self.gaussian_prior_var();
                theta
                    .iter()
                    .map(|t| std_normal_ln_pdf(t / var.sqrt()) - 0.5 * var.ln())
                    .sum()
            }
        })
    }

    fn gaussian_prior_var(&self) -> f64 {
        match self.name {
            TaskName::Heteroskedastic => self.config.hetero_prior_var,
            _ => self.config.prior_var,
        }
    }

    pub fn prior_sample(&self, rng: &mut Rng, n: usize) -> Array2<f64> {
        let d = self.theta_dim();
        match self.prior_box() {
            Some((lo, hi)) => {
                Array2::from_shape_fn((n, d), |(_, j)| rng.random_range(lo[j]..hi[j]))
            }
            None => {
                let sd = self.gaussian_prior_var().sqrt();
                Array2::from_shape_fn((n, d), |_| sd * rng.sample::<f64, _>(StandardNormal))
            }
        }
    }

    /// One draw from p(x | θ).
    pub fn simulate(&self, theta: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        check_dim(self.theta_dim(), theta.len())?;
        let c = &self.config;
        let mut normal = || rng.sample::<f64, _>(StandardNormal);
        Ok(match self.name {
            TaskName::GaussianLinear | TaskName::GaussianLinearUniform => {
                let sd = c.noise_var.sqrt();
                theta.iter().map(|t| t + sd * normal()).collect()
            }
            TaskName::TwoMoons => {
                let a = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
                let r = c.moons_radius_mean + c.moons_radius_sd * rng.sample::<f64, _>(StandardNormal);
                let (z0, z1) = moons_rotation(theta);
                vec![r * a.cos() + c.moons_offset - z0.abs(), r * a.sin() + z1]
            }
            TaskName::GaussianMixture => {
                let var = if rng.random::<bool>() {
                    c.mixture_broad_var
                } else {
                    c.mixture_narrow_var
                };
                let sd = var.sqrt();
                theta
                    .iter()
                    .map(|t| c.mixture_factor * t + sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            TaskName::Heteroskedastic => {
                let regime: f64 = normal();
                let noise = self.hetero_noise_var(regime).sqrt();
                vec![regime, theta[0] + noise * normal()]
            }
        })
    }

    /// Posterior variance of the heteroskedastic task for regime coordinate `x₁`.
    pub fn hetero_posterior_var(&self, regime: f64) -> f64 {
        let c = &self.config;
        let sd = if regime > 0.0 {
            c.hetero_posterior_sd * c.hetero_scale_ratio
        } else {
            c.hetero_posterior_sd
        };
        sd * sd
    }

    fn hetero_noise_var(&self, regime: f64) -> f64 {
        let v = self.hetero_posterior_var(regime);
        1.0 / (1.0 / v - 1.0 / self.config.hetero_prior_var)
    }

    pub fn log_likelihood(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        check_dim(self.theta_dim(), theta.len())?;
        check_dim(self.x_dim(), x.len())?;
        Ok(self.log_likelihood_unchecked(theta, x))
    }

    pub(crate) fn log_likelihood_unchecked(&self, theta: &[f64], x: &[f64]) -> f64 {
        let c = &self.config;
        match self.name {
            TaskName::GaussianLinear | TaskName::GaussianLinearUniform => {
                let sd = c.noise_var.sqrt();
                theta
                    .iter()
                    .zip(x)
                    .map(|(t, xi)| std_normal_ln_pdf((xi - t) / sd) - sd.ln())
                    .sum()
            }
            TaskName::TwoMoons => {
                let (z0, z1) = moons_rotation(theta);
                let u0 = x[0] + z0.abs() - c.moons_offset;
                let u1 = x[1] - z1;
                if u0 <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let r = (u0 * u0 + u1 * u1).sqrt();
                std_normal_ln_pdf((r - c.moons_radius_mean) / c.moons_radius_sd)
                    - c.moons_radius_sd.ln()
                    - std::f64::consts::PI.ln()
                    - r.ln()
            }
            TaskName::GaussianMixture => {
                let d2: f64 = theta
                    .iter()
                    .zip(x)
                    .map(|(t, xi)| (xi - c.mixture_factor * t).powi(2))
                    .sum();
                let comp = |var: f64| {
                    (0.5f64).ln() - d2 / (2.0 * var) - theta.len() as f64 * (LN_SQRT_2PI + 0.5 * var.ln())
                };
                log_add_exp(comp(c.mixture_broad_var), comp(c.mixture_narrow_var))
            }
            TaskName::Heteroskedastic => {
                let v = self.hetero_noise_var(x[0]);
                std_normal_ln_pdf(x[0]) + std_normal_ln_pdf((x[1] - theta[0]) / v.sqrt()) - 0.5 * v.ln()
            }
        }
    }

    /// Likelihood over the tensor grid `e0 × e1` (row-major, `e0` slow) as
    /// `(w, c)` with `p(x | θ_k) = w_k·exp(c)`. Cells whose likelihood is
    /// below ~1e-300 of the grid maximum may read as zero.
    pub(crate) fn grid_likelihood(&self, x: &[f64], e0: &[f64], e1: &[f64]) -> (Vec<f64>, f64) {
        let c = &self.config;
        let mut out = Vec::with_capacity(e0.len() * e1.len());
        match self.name {
            TaskName::GaussianMixture => {
                // Each component factorizes over the two axes.
                let r0: Vec<f64> = e0.iter().map(|t| (x[0] - c.mixture_factor * t).powi(2)).collect();
                let r1: Vec<f64> = e1.iter().map(|t| (x[1] - c.mixture_factor * t).powi(2)).collect();
                let parts: Vec<(f64, Vec<f64>, Vec<f64>)> = [c.mixture_broad_var, c.mixture_narrow_var]
                    .iter()
                    .map(|&var| {
                        let k = (0.5f64).ln() - 2.0 * (LN_SQRT_2PI + 0.5 * var.ln());
                        let axis = |r: &[f64]| {
                            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
                            let v: Vec<f64> = r.iter().map(|a| (-(a - lo) / (2.0 * var)).exp()).collect();
                            (v, lo / (2.0 * var))
                        };
                        let ((a, sa), (b, sb)) = (axis(&r0), axis(&r1));
                        (k - sa - sb, a, b)
                    })
                    .collect();
                let scale = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = parts.iter().map(|p| (p.0 - scale).exp()).collect();
                let (pb, pn) = (&parts[0], &parts[1]);
                for i in 0..e0.len() {
                    let (ab, an) = (w[0] * pb.1[i], w[1] * pn.1[i]);
                    for j in 0..e1.len() {
                        out.push(ab * pb.2[j] + an * pn.2[j]);
                    }
                }
                (out, scale)
            }
            TaskName::TwoMoons => {
                // p = φ((r − μ)/σ) / (σ·π·r); the 1/r factor stays in the weight.
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let inv_sd = 1.0 / c.moons_radius_sd;
                for &a in e0 {
                    for &b in e1 {
                        let (z0, z1) = ((a + b) * s, (b - a) * s);
                        let u0 = x[0] + z0.abs() - c.moons_offset;
                        if u0 <= 0.0 {
                            out.push(0.0);
                            continue;
                        }
                        let u1 = x[1] - z1;
                        let r = (u0 * u0 + u1 * u1).sqrt();
                        let q = (r - c.moons_radius_mean) * inv_sd;
                        out.push((-0.5 * q * q).exp() / r);
                    }
                }
                let scale = -LN_SQRT_2PI - c.moons_radius_sd.ln() - std::f64::consts::PI.ln();
                (out, scale)
            }
            _ => {
                for &a in e0 {
                    for &b in e1 {
                        out.push(self.log_likelihood_unchecked(&[a, b], x));
                    }
                }
                let scale = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for v in &mut out {
                    *v = (*v - scale).exp();
                }
                (out, scale)
            }
        }
    }

    /// The exact posterior at `x`.
    pub fn oracle_at(&self, x: &[f64]) -> Result<Dist> {
        self.posterior_at(x, &Distortion::identity())
    }

    /// The posterior at `x` contracted by `γ` about its mean and shifted by `δ`.
    ///
    /// Gaussian posteriors become N(m + δ, γ·Σ). For bounded priors the
    /// likelihood is contracted and the prior support is kept, so the result
    /// never loses mass the true posterior has.
    pub fn posterior_at(&self, x: &[f64], distortion: &Distortion) -> Result<Dist> {
        check_dim(self.x_dim(), x.len())?;
        let gamma = distortion.gamma;
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument("variance factor must be positive".into()));
        }
        if !distortion.shift.is_empty() {
            check_dim(self.theta_dim(), distortion.shift.len())?;
        }
        let c = &self.config;
        let sg = gamma.sqrt();
        match self.name {
            TaskName::GaussianLinear => {
                let w = c.prior_var / (c.prior_var + c.noise_var);
                let sd = (w * c.noise_var * gamma).sqrt();
                Ok(Dist::DiagGaussian(DiagGaussian::new(
                    x.iter()
                        .enumerate()
                        .map(|(i, xi)| w * xi + distortion.shift_at(i))
                        .collect(),
                    vec![sd; x.len()],
                )?))
            }
            TaskName::Heteroskedastic => {
                let v = self.hetero_posterior_var(x[0]);
                let mean = v * x[1] / self.hetero_noise_var(x[0]);
                Ok(Dist::DiagGaussian(DiagGaussian::new(
                    vec![mean + distortion.shift_at(0)],
                    vec![(v * gamma).sqrt()],
                )?))
            }
            TaskName::GaussianLinearUniform => {
                let (lo, hi) = self.prior_box().expect("bounded prior");
                let sd = c.noise_var.sqrt();
                let oracle =
                    TruncatedDiagGaussian::new(x.to_vec(), vec![sd; x.len()], lo.clone(), hi.clone(), c.rejection_cap)?;
                if distortion.is_identity() {
                    return Ok(Dist::TruncatedDiag(oracle));
                }
                let m = oracle.mean();
                let loc = (0..x.len())
                    .map(|i| m[i] + distortion.shift_at(i) + sg * (x[i] - m[i]))
                    .collect();
                Ok(Dist::TruncatedDiag(TruncatedDiagGaussian::new(
                    loc,
                    vec![sg * sd; x.len()],
                    lo,
                    hi,
                    c.rejection_cap,
                )?))
            }
            TaskName::TwoMoons | TaskName::GaussianMixture => {
                let oracle = GridPosterior::build(
                    GridTarget::oracle(self.clone(), x.to_vec()),
                    c.grid_resolution,
                    c.importance_pool,
                )?;
                if distortion.is_identity() {
                    return Ok(Dist::Grid(Arc::new(oracle)));
                }
                let target = GridTarget {
                    task: self.clone(),
                    x: x.to_vec(),
                    center: oracle.mean(),
                    inv_scale: 1.0 / sg,
                    shift: [distortion.shift_at(0), distortion.shift_at(1)],
                };
                Ok(Dist::Grid(Arc::new(GridPosterior::build(
                    target,
                    c.grid_resolution,
                    c.importance_pool,
                )?)))
            }
        }
    }

    pub fn oracle_posterior_sample(&self, x: &[f64], rng: &mut Rng, n: usize) -> Result<Array2<f64>> {
        self.oracle_at(x)?.sample(rng, n)
    }

    /// log p(θ | x). Normalized for the closed-form tasks; prior plus log
    /// likelihood (no evidence term) for the grid tasks.
    pub fn oracle_posterior_logdensity(&self, theta: &[f64], x: &[f64]) -> Result<LogDensity> {
        check_dim(self.theta_dim(), theta.len())?;
        check_dim(self.x_dim(), x.len())?;
        match self.name {
            TaskName::TwoMoons | TaskName::GaussianMixture => Ok(LogDensity {
                value: self.log_prior(theta)? + self.log_likelihood_unchecked(theta, x),
                normalized: false,
            }),
            _ => Ok(LogDensity {
                value: self.oracle_at(x)?.log_density(theta)?,
                normalized: true,
            }),
        }
    }

    pub fn generate_dataset(&self, size: usize, rng: &mut Rng) -> Result<CalibrationSet> {
        if size == 0 {
            return Err(Error::EmptyInput("dataset size must be at least 1"));
        }
        let theta = self.prior_sample(rng, size);
        let mut x = Array2::zeros((size, self.x_dim()));
        for i in 0..size {
            let xi = self.simulate(theta.row(i).as_slice().expect("row-major"), rng)?;
            x.row_mut(i).assign(&ArrayView1::from(&xi));
        }
        Ok(CalibrationSet { theta, x })
    }
}

fn moons_rotation(theta: &[f64]) -> (f64, f64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ((theta[0] + theta[1]) * s, (theta[1] - theta[0]) * s)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl CalibrationSet {
    pub fn new(theta: Array2<f64>, x: Array2<f64>) -> Result<Self> {
        check_dim(theta.nrows(), x.nrows())?;
        Ok(CalibrationSet { theta, x })
    }

    pub fn len(&self) -> usize {
        self.theta.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta_dim(&self) -> usize {
        self.theta.ncols()
    }

    pub fn x_dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn theta_row(&self, i: usize) -> &[f64] {
        self.theta.row(i).to_slice().expect("row-major storage")
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        self.x.row(i).to_slice().expect("row-major storage")
    }

    pub fn select(&self, indices: &[usize]) -> CalibrationSet {
        CalibrationSet {
            theta: self.theta.select(ndarray::Axis(0), indices),
            x: self.x.select(ndarray::Axis(0), indices),
        }
    }

    /// First `n` rows and the remainder.
    pub fn split_at(&self, n: usize) -> (CalibrationSet, CalibrationSet) {
        let n = n.min(self.len());
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        (self.select(&head), self.select(&tail))
    }

    /// Writes `theta_0..theta_{d-1},x_0..x_{k-1}` with shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (0..self.theta_dim())
            .map(|i| format!("theta_{i}"))
            .chain((0..self.x_dim()).map(|i| format!("x_{i}")))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.len() {
            let rec: Vec<String> = self
                .theta_row(i)
                .iter()
                .chain(self.x_row(i))
                .map(|v| v.to_string())
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let d = header.iter().take_while(|h| h.starts_with("theta_")).count();
        let k = header.len() - d;
        for (j, h) in header.iter().enumerate() {
            let expected = if j < d {
                format!("theta_{j}")
            } else {
                format!("x_{}", j - d)
            };
            if h != expected {
                return Err(Error::InvalidArgument(format!(
                    "unexpected dataset column `{h}`, expected `{expected}`"
                )));
            }
        }
        let mut theta = Vec::new();
        let mut x = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("non-numeric dataset field `{field}`"))
                })?;
                if j < d {
                    theta.push(v);
                } else {
                    x.push(v);
                }
            }
        }
        let n = theta.len() / d.max(1);
        Ok(CalibrationSet {
            theta: Array2::from_shape_vec((n, d), theta)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?,
            x: Array2::from_shape_vec((n, k), x).map_err(|e| Error::InvalidArgument(e.to_string()))?,
        })
    }
}
