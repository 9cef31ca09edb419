//! Approximate posteriors with controllable misspecification.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dist::{Dist, MvGaussian};
use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;
use crate::tasks::{CalibrationSet, Distortion, Task};
use crate::transform::ParameterTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurrogateKind {
    /// The exact posterior.
    OracleWrapped,
    /// Posterior contracted about its mean by `gamma`.
    VarianceScaled,
    /// Posterior shifted by `shift`.
    MeanShifted,
    /// Gaussian linear regression of θ on x.
    ConditionalGaussianFit,
    /// Contracted and shifted posterior with the density withheld.
    SampleOnly,
}

impl std::str::FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use SurrogateKind::*;
        [OracleWrapped, VarianceScaled, MeanShifted, ConditionalGaussianFit, SampleOnly]
            .into_iter()
            .find(|k| format!("{k:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown surrogate kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub gamma: f64,
    /// Empty means no shift.
    pub shift: Vec<f64>,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec {
            kind: SurrogateKind::VarianceScaled,
            gamma: 0.5,
            shift: Vec::new(),
        }
    }
}

impl SurrogateSpec {
    pub fn oracle() -> Self {
        SurrogateSpec {
            kind: SurrogateKind::OracleWrapped,
            gamma: 1.0,
            shift: Vec::new(),
        }
    }

    pub fn variance_scaled(gamma: f64) -> Self {
        SurrogateSpec {
            kind: SurrogateKind::VarianceScaled,
            gamma,
            shift: Vec::new(),
        }
    }

    pub fn needs_training(&self) -> bool {
        self.kind == SurrogateKind::ConditionalGaussianFit
    }

    fn distortion(&self) -> Distortion {
        match self.kind {
            SurrogateKind::OracleWrapped | SurrogateKind::ConditionalGaussianFit => {
                Distortion::identity()
            }
            SurrogateKind::VarianceScaled => Distortion {
                gamma: self.gamma,
                shift: Vec::new(),
            },
            SurrogateKind::MeanShifted => Distortion {
                gamma: 1.0,
                shift: self.shift.clone(),
            },
            SurrogateKind::SampleOnly => Distortion {
                gamma: self.gamma,
                shift: self.shift.clone(),
            },
        }
    }
}

/// θ | x ~ N(A·x + b, Σ) fitted by least squares.
#[derive(Debug, Clone)]
pub struct LinearGaussianFit {
    pub coef: DMatrix<f64>,
    pub intercept: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl LinearGaussianFit {
    pub fn fit(train: &CalibrationSet) -> Result<Self> {
        let (n, d, k) = (train.len(), train.theta_dim(), train.x_dim());
        if n < (d + 2).max(k + 2) {
            return Err(Error::InvalidArgument(format!(
                "linear Gaussian fit needs at least {} training pairs, got {n}",
                (d + 2).max(k + 2)
            )));
        }
        let design = DMatrix::from_fn(n, k + 1, |i, j| if j < k { train.x[(i, j)] } else { 1.0 });
        let targets = DMatrix::from_fn(n, d, |i, j| train.theta[(i, j)]);
        let gram = design.transpose() * &design;
        let chol = gram.cholesky().ok_or(Error::SingularDesign)?;
        let pivots = chol.l_dirty().diagonal();
        if pivots.min() <= 1e-7 * pivots.max() {
            return Err(Error::SingularDesign);
        }
        let beta = chol.solve(&(design.transpose() * &targets));
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularDesign);
        }
        let resid = targets - &design * &beta;
        let cov = resid.transpose() * &resid / (n - k - 1) as f64;
        Ok(LinearGaussianFit {
            coef: beta.rows(0, k).transpose(),
            intercept: beta.row(k).transpose(),
            cov,
        })
    }

    pub fn at(&self, x: &[f64]) -> Result<Dist> {
        check_dim(self.coef.ncols(), x.len())?;
        let mean = &self.coef * DVector::from_column_slice(x) + &self.intercept;
        Ok(Dist::Gaussian(MvGaussian::new(mean, self.cov.clone())?))
    }
}

/// A conditional sampler with optional density, defined on the (possibly
/// transformed) parameter space.
#[derive(Debug, Clone)]
pub struct SurrogatePosterior {
    kind: SurrogateKind,
    task: Task,
    distortion: Distortion,
    fit: Option<LinearGaussianFit>,
    transform: ParameterTransform,
}

/// The surrogate at a fixed observation.
#[derive(Debug, Clone)]
pub struct Conditional {
    dist: Dist,
    density: bool,
}

impl SurrogatePosterior {
    /// Builds a surrogate. Only `ConditionalGaussianFit` reads `train`.
    pub fn fit(spec: &SurrogateSpec, task: &Task, train: Option<&CalibrationSet>) -> Result<Self> {
        if !(spec.gamma > 0.0) {
            return Err(Error::InvalidArgument("surrogate.gamma must be positive".into()));
        }
        if !spec.shift.is_empty() {
            check_dim(task.theta_dim(), spec.shift.len())?;
        }
        let fit = if spec.needs_training() {
            let train = train.ok_or(Error::EmptyInput("training set"))?;
            check_dim(task.theta_dim(), train.theta_dim())?;
            check_dim(task.x_dim(), train.x_dim())?;
            Some(LinearGaussianFit::fit(train)?)
        } else {
            None
        };
        Ok(SurrogatePosterior {
            kind: spec.kind,
            task: task.clone(),
            distortion: spec.distortion(),
            fit,
            transform: ParameterTransform::Identity,
        })
    }

    pub fn oracle(task: &Task) -> Self {
        Self::fit(&SurrogateSpec::oracle(), task, None).expect("oracle surrogate needs no data")
    }

    /// The surrogate for φ = g(θ): each conditional is pushed through `g`.
    pub fn with_transform(mut self, transform: ParameterTransform) -> Result<Self> {
        transform.output_dim(self.task.theta_dim())?;
        self.transform = transform;
        Ok(self)
    }

    pub fn kind(&self) -> SurrogateKind {
        self.kind
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn transform(&self) -> &ParameterTransform {
        &self.transform
    }

    pub fn linear_fit(&self) -> Option<&LinearGaussianFit> {
        self.fit.as_ref()
    }

    /// Dimension of the space the surrogate lives on (after the transform).
    pub fn theta_dim(&self) -> usize {
        self.transform
            .output_dim(self.task.theta_dim())
            .expect("validated in with_transform")
    }

    pub fn density_available(&self) -> bool {
        self.kind != SurrogateKind::SampleOnly
    }

    pub fn at(&self, x: &[f64]) -> Result<Conditional> {
        let base = match &self.fit {
            Some(fit) => fit.at(x)?,
            None => self.task.posterior_at(x, &self.distortion)?,
        };
        let dist = base.pushforward(&self.transform)?;
        let density = self.density_available() && dist.has_density();
        Ok(Conditional { dist, density })
    }

    pub fn sample(&self, x: &[f64], rng: &mut Rng, n: usize) -> Result<Array2<f64>> {
        self.at(x)?.sample(rng, n)
    }

    pub fn log_density(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        if !self.density_available() {
            return Err(Error::UnsupportedDensity);
        }
        self.at(x)?.log_density(theta)
    }
}

impl Conditional {
    pub fn dim(&self) -> usize {
        self.dist.dim()
    }

    pub fn has_density(&self) -> bool {
        self.density
    }

    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(Error::EmptyInput("number of draws"));
        }
        self.dist.sample(rng, n)
    }

    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        if !self.density {
            return Err(Error::UnsupportedDensity);
        }
        self.dist.log_density(theta)
    }

    /// Per-coordinate mean and standard deviation when known in closed form.
    pub fn gaussian_moments(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.dist.gaussian_moments()
    }

    pub fn dist(&self) -> &Dist {
        &self.dist
    }
}
