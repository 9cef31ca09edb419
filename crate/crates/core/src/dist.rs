//! Parameter distributions at a fixed observation.
//!
//! Both oracle posteriors and surrogate posteriors resolve to a [`Dist`] once
//! `x` is fixed. Closed forms are kept wherever a pushforward allows it so that
//! densities stay exact; anything else falls back to sample-only.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::grid::GridPosterior;
use crate::rng::Rng;
use crate::stats::{ln_normal_mass, std_normal_ln_pdf, std_normal_pdf, LN_SQRT_2PI};
use crate::transform::ParameterTransform;

#[derive(Debug, Clone)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MvGaussian {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

/// Independent normals, each truncated to `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct TruncatedDiagGaussian {
    pub loc: Vec<f64>,
    pub scale: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    ln_mass: Vec<f64>,
    rejection_cap: usize,
}

/// A base distribution pushed through φ = A·θ + b.
#[derive(Debug, Clone)]
pub struct Mapped {
    base: Box<Dist>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    inverse: Option<(DMatrix<f64>, f64)>,
}

#[derive(Debug, Clone)]
pub enum Dist {
    DiagGaussian(DiagGaussian),
    Gaussian(MvGaussian),
    TruncatedDiag(TruncatedDiagGaussian),
    Grid(Arc<GridPosterior>),
    Mapped(Mapped),
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        check_dim(mean.len(), sd.len())?;
        if let Some(i) = sd.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::ZeroVariance(i));
        }
        Ok(DiagGaussian { mean, sd })
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.sd)
            .zip(theta)
            .map(|((m, s), t)| std_normal_ln_pdf((t - m) / s) - s.ln())
            .sum()
    }
}

impl MvGaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), cov.nrows())?;
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?
            .l();
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(MvGaussian {
            mean,
            chol,
            log_det,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(theta) - &self.mean;
        let z = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        -0.5 * z.norm_squared() - 0.5 * self.log_det - LN_SQRT_2PI * self.mean.len() as f64
    }
}

impl TruncatedDiagGaussian {
    pub fn new(
        loc: Vec<f64>,
        scale: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
        rejection_cap: usize,
    ) -> Result<Self> {
        let d = loc.len();
        check_dim(d, scale.len())?;
        check_dim(d, lo.len())?;
        check_dim(d, hi.len())?;
        let mut ln_mass = Vec::with_capacity(d);
        for i in 0..d {
            if !(scale[i] > 0.0) {
                return Err(Error::ZeroVariance(i));
            }
            if !(lo[i] < hi[i]) {
                return Err(Error::InvalidArgument(format!(
                    "empty truncation interval in dimension {i}"
                )));
            }
            ln_mass.push(ln_normal_mass(
                (lo[i] - loc[i]) / scale[i],
                (hi[i] - loc[i]) / scale[i],
            ));
        }
        Ok(TruncatedDiagGaussian {
            loc,
            scale,
            lo,
            hi,
            ln_mass,
            rejection_cap,
        })
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, &t) in theta.iter().enumerate() {
            if t < self.lo[i] || t > self.hi[i] {
                return f64::NEG_INFINITY;
            }
            let s = self.scale[i];
            total += std_normal_ln_pdf((t - self.loc[i]) / s) - s.ln() - self.ln_mass[i];
        }
        total
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.loc.len())
            .map(|i| {
                let s = self.scale[i];
                let a = (self.lo[i] - self.loc[i]) / s;
                let b = (self.hi[i] - self.loc[i]) / s;
                self.loc[i] + s * (std_normal_pdf(a) - std_normal_pdf(b)) / self.ln_mass[i].exp()
            })
            .collect()
    }

    /// Coordinate-wise rejection from the untruncated normal. The proposal cap
    /// applies to each drawn vector.
    fn sample(&self, rng: &mut Rng, n: usize) -> Result<Array2<f64>> {
        let d = self.loc.len();
        let mut out = Array2::zeros((n, d));
        for r in 0..n {
            let mut proposals = 0usize;
            for i in 0..d {
                loop {
                    if proposals >= self.rejection_cap {
                        return Err(Error::RejectionCap(proposals));
                    }
                    proposals += 1;
                    let z: f64 = rng.sample(StandardNormal);
                    let v = self.loc[i] + self.scale[i] * z;
                    if v >= self.lo[i] && v <= self.hi[i] {
                        out[(r, i)] = v;
                        break;
                    }
                }
            }
        }
        Ok(out)
    }

    fn subset(&self, coords: &[(usize, f64, f64)]) -> Result<Self> {
        let mut loc = Vec::new();
        let mut scale = Vec::new();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for &(c, a, b) in coords {
            let (l, h) = (a * self.lo[c] + b, a * self.hi[c] + b);
            loc.push(a * self.loc[c] + b);
            scale.push(a.abs() * self.scale[c]);
            lo.push(l.min(h));
            hi.push(l.max(h));
        }
        TruncatedDiagGaussian::new(loc, scale, lo, hi, self.rejection_cap)
    }
}

impl Mapped {
    fn new(base: Dist, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let inverse = if a.is_square() {
            let det = a.determinant();
            a.clone()
                .try_inverse()
                .filter(|_| det != 0.0)
                .map(|inv| (inv, det.abs().ln()))
        } else {
            None
        };
        Mapped {
            base: Box::new(base),
            a,
            b,
            inverse,
        }
    }
}

impl Dist {
    pub fn dim(&self) -> usize {
        match self {
            Dist::DiagGaussian(g) => g.mean.len(),
            Dist::Gaussian(g) => g.mean.len(),
            Dist::TruncatedDiag(t) => t.loc.len(),
            Dist::Grid(_) => 2,
            Dist::Mapped(m) => m.a.nrows(),
        }
    }

    pub fn has_density(&self) -> bool {
        match self {
            Dist::Mapped(m) => m.inverse.is_some() && m.base.has_density(),
            _ => true,
        }
    }

    /// Normalized log density; `-inf` outside the support.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        match self {
            Dist::DiagGaussian(g) => Ok(g.log_density(theta)),
            Dist::Gaussian(g) => Ok(g.log_density(theta)),
            Dist::TruncatedDiag(t) => Ok(t.log_density(theta)),
            Dist::Grid(g) => Ok(g.log_density(theta)),
            Dist::Mapped(m) => {
                let (inv, ln_abs_det) = m.inverse.as_ref().ok_or(Error::UnsupportedDensity)?;
                let pre = inv * (DVector::from_column_slice(theta) - &m.b);
                Ok(m.base.log_density(pre.as_slice())? - ln_abs_det)
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<Array2<f64>> {
        let d = self.dim();
        match self {
            Dist::DiagGaussian(g) => Ok(Array2::from_shape_fn((n, d), |(_, j)| {
                g.mean[j] + g.sd[j] * rng.sample::<f64, _>(StandardNormal)
            })),
            Dist::Gaussian(g) => {
                let mut out = Array2::zeros((n, d));
                for r in 0..n {
                    let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let v = &g.mean + &g.chol * z;
                    for j in 0..d {
                        out[(r, j)] = v[j];
                    }
                }
                Ok(out)
            }
            Dist::TruncatedDiag(t) => t.sample(rng, n),
            Dist::Grid(g) => g.sample(rng, n),
            Dist::Mapped(m) => {
                let base = m.base.sample(rng, n)?;
                let mut out = Array2::zeros((n, d));
                for (r, row) in base.rows().into_iter().enumerate() {
                    let v = &m.a * DVector::from_iterator(row.len(), row.iter().copied()) + &m.b;
                    for j in 0..d {
                        out[(r, j)] = v[j];
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Dist::DiagGaussian(g) => g.mean.clone(),
            Dist::Gaussian(g) => g.mean.as_slice().to_vec(),
            Dist::TruncatedDiag(t) => t.mean(),
            Dist::Grid(g) => g.mean().to_vec(),
            Dist::Mapped(m) => {
                let v = &m.a * DVector::from_vec(m.base.mean()) + &m.b;
                v.as_slice().to_vec()
            }
        }
    }

    /// Per-coordinate mean and standard deviation, when known in closed form.
    pub fn gaussian_moments(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Dist::DiagGaussian(g) => Some((g.mean.clone(), g.sd.clone())),
            Dist::Gaussian(g) => {
                let cov = g.covariance();
                Some((
                    g.mean.as_slice().to_vec(),
                    cov.diagonal().iter().map(|v| v.sqrt()).collect(),
                ))
            }
            _ => None,
        }
    }

    /// Distribution of g(θ) for θ drawn from `self`.
    pub fn pushforward(self, transform: &ParameterTransform) -> Result<Dist> {
        let d = self.dim();
        transform.output_dim(d)?;
        if transform.is_identity() {
            return Ok(self);
        }
        let coordwise = transform.coordinatewise(d);
        match (self, coordwise) {
            (Dist::DiagGaussian(g), Some(c)) => Ok(Dist::DiagGaussian(DiagGaussian::new(
                c.iter().map(|&(i, a, b)| a * g.mean[i] + b).collect(),
                c.iter().map(|&(i, a, _)| a.abs() * g.sd[i]).collect(),
            )?)),
            (Dist::TruncatedDiag(t), Some(c)) => Ok(Dist::TruncatedDiag(t.subset(&c)?)),
            (Dist::DiagGaussian(g), None) => {
                let cov = DMatrix::from_diagonal(&DVector::from_iterator(
                    d,
                    g.sd.iter().map(|s| s * s),
                ));
                let mean = DVector::from_vec(g.mean);
                gaussian_pushforward(&mean, &cov, transform)
            }
            (Dist::Gaussian(g), _) => gaussian_pushforward(&g.mean, &g.covariance(), transform),
            (Dist::Mapped(m), _) => {
                let (a, b) = transform.to_affine(d);
                let composed_b = &a * &m.b + b;
                let composed_a = a * &m.a;
                Ok(Dist::Mapped(Mapped::new(*m.base, composed_a, composed_b)))
            }
            (base, _) => {
                let (a, b) = transform.to_affine(d);
                Ok(Dist::Mapped(Mapped::new(base, a, b)))
            }
        }
    }
}

fn gaussian_pushforward(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    transform: &ParameterTransform,
) -> Result<Dist> {
    let (a, b) = transform.to_affine(mean.len());
    let m = &a * mean + b;
    let c = &a * cov * a.transpose();
    Ok(Dist::Gaussian(MvGaussian::new(m, c)?))
}
