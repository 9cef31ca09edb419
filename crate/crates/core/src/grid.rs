//! Posterior on a bounded 2D parameter box, tabulated on a regular grid.
//!
//! The grid gives the normalizing constant (midpoint quadrature) and a
//! piecewise-constant proposal; draws are produced by sampling-importance-
//! resampling against the exact unnormalized density, so they are not tied to
//! cell centers.

use ndarray::Array2;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tasks::Task;

/// Unnormalized log density on the prior box.
///
/// With the identity distortion this is the oracle posterior. Otherwise the
/// likelihood is read at the expanded point `c + (θ − δ − c)/√γ`, which
/// contracts the posterior around `c` by `√γ` and shifts it by `δ` while
/// keeping the prior support.
#[derive(Debug, Clone)]
pub struct GridTarget {
    pub task: Task,
    pub x: Vec<f64>,
    pub center: [f64; 2],
    pub inv_scale: f64,
    pub shift: [f64; 2],
}

impl GridTarget {
    pub fn oracle(task: Task, x: Vec<f64>) -> Self {
        GridTarget {
            task,
            x,
            center: [0.0; 2],
            inv_scale: 1.0,
            shift: [0.0; 2],
        }
    }

    fn expand_coord(&self, axis: usize, t: f64) -> f64 {
        self.center[axis] + (t - self.shift[axis] - self.center[axis]) * self.inv_scale
    }

    pub fn log_unnormalized(&self, theta: &[f64]) -> f64 {
        if !self.task.in_prior_support(theta) {
            return f64::NEG_INFINITY;
        }
        let e = [self.expand_coord(0, theta[0]), self.expand_coord(1, theta[1])];
        self.task.log_likelihood_unchecked(&e, &self.x)
    }
}

#[derive(Debug, Clone)]
pub struct GridPosterior {
    target: GridTarget,
    lo: [f64; 2],
    width: [f64; 2],
    resolution: usize,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    log_max: f64,
    log_norm: f64,
    mean: [f64; 2],
    pool_factor: usize,
}

impl GridPosterior {
    pub fn build(target: GridTarget, resolution: usize, pool_factor: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidArgument("grid resolution must be at least 2".into()));
        }
        let (lo, hi) = target
            .task
            .prior_box()
            .ok_or_else(|| Error::InvalidArgument("grid posterior needs a bounded prior".into()))?;
        if lo.len() != 2 {
            return Err(Error::InvalidArgument("grid posterior is two-dimensional".into()));
        }
        let lo = [lo[0], lo[1]];
        let width = [
            (hi[0] - lo[0]) / resolution as f64,
            (hi[1] - lo[1]) / resolution as f64,
        ];
        let axis = |a: usize| -> Vec<f64> {
            (0..resolution)
                .map(|i| lo[a] + (i as f64 + 0.5) * width[a])
                .collect()
        };
        let (c0, c1) = (axis(0), axis(1));
        let e0: Vec<f64> = c0.iter().map(|&t| target.expand_coord(0, t)).collect();
        let e1: Vec<f64> = c1.iter().map(|&t| target.expand_coord(1, t)).collect();
        let (mut weights, scale) = target.task.grid_likelihood(&target.x, &e0, &e1);
        let peak = weights.iter().copied().fold(0.0, f64::max);
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::InvalidArgument(
                "observation has zero posterior mass on the grid".into(),
            ));
        }
        for w in &mut weights {
            *w /= peak;
        }
        let log_max = scale + peak.ln();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        let mut m = [0.0; 2];
        for (i, row) in weights.chunks_exact(resolution).enumerate() {
            let mut row_total = 0.0;
            for (j, w) in row.iter().enumerate() {
                acc += w;
                cumulative.push(acc);
                row_total += w;
                m[1] += w * c1[j];
            }
            m[0] += row_total * c0[i];
        }
        let cell_area = width[0] * width[1];
        Ok(GridPosterior {
            target,
            lo,
            width,
            resolution,
            weights,
            cumulative,
            log_max,
            log_norm: log_max + (acc * cell_area).ln(),
            mean: [m[0] / acc, m[1] / acc],
            pool_factor: pool_factor.max(1),
        })
    }

    pub fn target(&self) -> &GridTarget {
        &self.target
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    /// Log of the quadrature normalizing constant of the unnormalized density.
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        self.target.log_unnormalized(theta) - self.log_norm
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Cell-center coordinates of flat cell index `k`.
    pub fn cell_center(&self, k: usize) -> [f64; 2] {
        let (i, j) = (k / self.resolution, k % self.resolution);
        [
            self.lo[0] + (i as f64 + 0.5) * self.width[0],
            self.lo[1] + (j as f64 + 0.5) * self.width[1],
        ]
    }

    /// Normalized quadrature mass of each cell.
    pub fn cell_masses(&self) -> Vec<f64> {
        let total = *self.cumulative.last().expect("grid is nonempty");
        self.weights.iter().map(|w| w / total).collect()
    }

    fn pick(cumulative: &[f64], u: f64) -> usize {
        cumulative
            .partition_point(|&c| c <= u)
            .min(cumulative.len() - 1)
    }

    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<Array2<f64>> {
        let total = *self.cumulative.last().expect("grid is nonempty");
        let pool_size = n * self.pool_factor;
        let mut pool = Vec::with_capacity(pool_size);
        let mut pool_cum = Vec::with_capacity(pool_size);
        let mut acc = 0.0;
        for _ in 0..pool_size {
            let k = Self::pick(&self.cumulative, rng.random::<f64>() * total);
            let c = self.cell_center(k);
            let theta = [
                c[0] + (rng.random::<f64>() - 0.5) * self.width[0],
                c[1] + (rng.random::<f64>() - 0.5) * self.width[1],
            ];
            // target / proposal, up to the shared constant
            let w = (self.target.log_unnormalized(&theta) - self.log_max).exp() / self.weights[k];
            acc += w;
            pool.push(theta);
            pool_cum.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::InvalidArgument(
                "importance weights vanished on every proposal".into(),
            ));
        }
        let mut out = Array2::zeros((n, 2));
        for r in 0..n {
            let k = Self::pick(&pool_cum, rng.random::<f64>() * acc);
            out[(r, 0)] = pool[k][0];
            out[(r, 1)] = pool[k][1];
        }
        Ok(out)
    }
}
