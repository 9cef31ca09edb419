//! Conformity scores: smaller means more plausible under the surrogate.

use std::sync::Arc;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{stream_at, Rng};
use crate::stats::{mean, sample_variance, std_normal_quantile, LN_SQRT_2PI};
use crate::surrogate::{Conditional, SurrogatePosterior};

const TAG_SCORE_DRAWS: u64 = 0x5c0e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreKind {
    /// `−p̂(θ | x)`.
    HpdDensity,
    /// `−p̂(θ | x)` with `p̂` a Gaussian KDE over surrogate draws.
    HpdKde,
    /// Largest standardized coordinate residual.
    Symmetric,
    /// Distance outside the central surrogate interval (scalar θ only).
    Quantile,
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use ScoreKind::*;
        [HpdDensity, HpdKde, Symmetric, Quantile]
            .into_iter()
            .find(|k| format!("{k:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown score kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSpec {
    pub kind: ScoreKind,
    /// Surrogate draws used for KDE, moment and quantile estimates.
    pub draws: usize,
    /// Quantile levels; default to `α/2` and `1 − α/2`.
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
}

impl Default for ScoreSpec {
    fn default() -> Self {
        ScoreSpec {
            kind: ScoreKind::HpdDensity,
            draws: 1000,
            alpha1: None,
            alpha2: None,
        }
    }
}

impl ScoreSpec {
    pub fn new(kind: ScoreKind) -> Self {
        ScoreSpec {
            kind,
            ..ScoreSpec::default()
        }
    }
}

/// Per-dimension kernel widths.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidth(pub Vec<f64>);

/// Scott's rule: `h_j = σ̂_j · n^(−1/(d+4))`.
pub fn scott_bandwidth(samples: ArrayView2<f64>) -> Result<Bandwidth> {
    let (n, d) = samples.dim();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "bandwidth needs at least two samples".into(),
        ));
    }
    let factor = (n as f64).powf(-1.0 / (d as f64 + 4.0));
    let mut h = Vec::with_capacity(d);
    for j in 0..d {
        let sd = sample_variance(&samples.column(j).to_vec()).sqrt();
        if !(sd > 0.0) {
            return Err(Error::ZeroVariance(j));
        }
        h.push(sd * factor);
    }
    Ok(Bandwidth(h))
}

/// `−(1/L) Σ_l K_h(θ − θ_l)` with a diagonal Gaussian product kernel.
pub fn kde_hpd_score(samples: ArrayView2<f64>, bw: &Bandwidth, theta: &[f64]) -> Result<f64> {
    let (l, d) = samples.dim();
    if l == 0 {
        return Err(Error::EmptyInput("kernel density samples"));
    }
    check_dim(d, theta.len())?;
    check_dim(d, bw.0.len())?;
    let inv: Vec<f64> = bw.0.iter().map(|h| 1.0 / h).collect();
    let ln_norm = -(d as f64) * LN_SQRT_2PI + inv.iter().map(|v| v.ln()).sum::<f64>();
    let mut total = 0.0;
    for row in samples.rows() {
        let mut q = 0.0;
        for j in 0..d {
            let z = (theta[j] - row[j]) * inv[j];
            q += z * z;
        }
        total += (-0.5 * q).exp();
    }
    Ok(-(ln_norm.exp()) * total / l as f64)
}

/// Fraction of `samples` at or below `value`.
pub fn ecdf_transform(value: f64, samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("score samples"));
    }
    Ok(samples.iter().filter(|&&s| s <= value).count() as f64 / samples.len() as f64)
}

/// The `⌈n·level⌉`-th order statistic index (1-based), guarding against
/// representation error when `n·level` is an integer.
pub(crate) fn ceil_rank(n: usize, level: f64) -> usize {
    let r = n as f64 * level;
    let k = r.round();
    if (r - k).abs() <= 1e-9 * r.abs().max(1.0) {
        k as usize
    } else {
        r.ceil() as usize
    }
}

/// Sorted score draws at one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedScores(Vec<f64>);

impl SortedScores {
    pub fn new(mut scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyInput("score samples"));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidArgument("score is NaN".into()));
        }
        scores.sort_by(f64::total_cmp);
        Ok(SortedScores(scores))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn ecdf(&self, value: f64) -> f64 {
        self.0.partition_point(|&s| s <= value) as f64 / self.0.len() as f64
    }

    /// Right-continuous inverse: the `⌈n·level⌉`-th smallest value, `−∞` at
    /// level 0 and the maximum at level 1.
    pub fn quantile(&self, level: f64) -> f64 {
        match ceil_rank(self.0.len(), level.clamp(0.0, 1.0)) {
            0 => f64::NEG_INFINITY,
            k => self.0[k.min(self.0.len()) - 1],
        }
    }

    /// Largest `c` with `{s ≤ c} = {s : ecdf(s) ≤ level}`: just below the
    /// first draw whose inclusion would push the ecdf past `level`, and `+∞`
    /// once every draw fits.
    pub fn pit_cutoff(&self, level: f64) -> f64 {
        let m = self.0.len();
        let fits = |k: usize| k as f64 / m as f64 <= level;
        let mut k = ((m as f64 * level).floor().max(0.0) as usize).min(m);
        while k < m && fits(k + 1) {
            k += 1;
        }
        while k > 0 && !fits(k) {
            k -= 1;
        }
        if k >= m {
            f64::INFINITY
        } else {
            self.0[k].next_down()
        }
    }

    pub fn variance(&self) -> f64 {
        if self.0.len() < 2 {
            0.0
        } else {
            sample_variance(&self.0)
        }
    }
}

/// A score kind bound to a surrogate.
#[derive(Debug, Clone)]
pub struct ScoreFunction {
    kind: ScoreKind,
    surrogate: Arc<SurrogatePosterior>,
    draws: usize,
    levels: (f64, f64),
    seed: u64,
}

impl ScoreFunction {
    /// `alpha` fixes default quantile levels; `seed` drives the per-observation
    /// draws behind KDE, moment and quantile estimates.
    pub fn new(
        spec: &ScoreSpec,
        surrogate: Arc<SurrogatePosterior>,
        alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
        }
        let levels = (
            spec.alpha1.unwrap_or(alpha / 2.0),
            spec.alpha2.unwrap_or(1.0 - alpha / 2.0),
        );
        match spec.kind {
            ScoreKind::HpdDensity if !surrogate.density_available() => {
                return Err(Error::UnsupportedDensity)
            }
            ScoreKind::HpdKde | ScoreKind::Symmetric | ScoreKind::Quantile if spec.draws < 2 => {
                return Err(Error::InvalidArgument("score.L must be at least 2".into()))
            }
            ScoreKind::Quantile => {
                if surrogate.theta_dim() != 1 {
                    return Err(Error::InvalidArgument(
                        "quantile score needs a scalar parameter".into(),
                    ));
                }
                let (a1, a2) = levels;
                if !(0.0 < a1 && a1 < a2 && a2 < 1.0) || ((a2 - a1) - (1.0 - alpha)).abs() > 1e-9
                {
                    return Err(Error::InvalidArgument(
                        "score.alpha1 and score.alpha2 must satisfy 0 < alpha1 < alpha2 < 1 \
                         and alpha2 - alpha1 = 1 - alpha"
                            .into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(ScoreFunction {
            kind: spec.kind,
            surrogate,
            draws: spec.draws,
            levels,
            seed,
        })
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn surrogate(&self) -> &Arc<SurrogatePosterior> {
        &self.surrogate
    }

    pub fn theta_dim(&self) -> usize {
        self.surrogate.theta_dim()
    }

    /// Prepares everything the score needs at `x`.
    pub fn at(&self, x: &[f64]) -> Result<ScoreAt> {
        let cond = self.surrogate.at(x)?;
        let draws = |cond: &Conditional| {
            cond.sample(&mut stream_at(self.seed, TAG_SCORE_DRAWS, x), self.draws)
        };
        let prepared = match self.kind {
            ScoreKind::HpdDensity => {
                if !cond.has_density() {
                    return Err(Error::UnsupportedDensity);
                }
                Prepared::Density
            }
            ScoreKind::HpdKde => {
                let samples = draws(&cond)?;
                let bw = scott_bandwidth(samples.view())?;
                Prepared::Kde { samples, bw }
            }
            ScoreKind::Symmetric => {
                let (mean, sd) = match cond.gaussian_moments() {
                    Some(m) => m,
                    None => {
                        let s = draws(&cond)?;
                        let cols: Vec<Vec<f64>> = s.columns().into_iter().map(|c| c.to_vec()).collect();
                        (
                            cols.iter().map(|c| mean(c)).collect(),
                            cols.iter().map(|c| sample_variance(c).sqrt()).collect(),
                        )
                    }
                };
                if let Some(j) = sd.iter().position(|s| !(*s > 0.0)) {
                    return Err(Error::ZeroVariance(j));
                }
                Prepared::Symmetric { mean, sd }
            }
            ScoreKind::Quantile => {
                let (a1, a2) = self.levels;
                let (lo, hi) = match cond.gaussian_moments() {
                    Some((m, s)) => (
                        m[0] + s[0] * std_normal_quantile(a1),
                        m[0] + s[0] * std_normal_quantile(a2),
                    ),
                    None => {
                        let s = SortedScores::new(draws(&cond)?.column(0).to_vec())?;
                        (s.quantile(a1), s.quantile(a2))
                    }
                };
                Prepared::Quantile { lo, hi }
            }
        };
        Ok(ScoreAt {
            x: x.to_vec(),
            cond,
            prepared,
        })
    }

    pub fn score(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        self.at(x)?.score(theta)
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    Density,
    Kde { samples: ndarray::Array2<f64>, bw: Bandwidth },
    Symmetric { mean: Vec<f64>, sd: Vec<f64> },
    Quantile { lo: f64, hi: f64 },
}

/// A score function evaluated at one observation.
#[derive(Debug, Clone)]
pub struct ScoreAt {
    x: Vec<f64>,
    cond: Conditional,
    prepared: Prepared,
}

impl ScoreAt {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn conditional(&self) -> &Conditional {
        &self.cond
    }

    pub fn score(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.cond.dim(), theta.len())?;
        match &self.prepared {
            Prepared::Density => Ok(-self.cond.log_density(theta)?.exp()),
            Prepared::Kde { samples, bw } => kde_hpd_score(samples.view(), bw, theta),
            Prepared::Symmetric { mean, sd } => Ok(theta
                .iter()
                .zip(mean.iter().zip(sd))
                .map(|(t, (m, s))| (t - m).abs() / s)
                .fold(0.0, f64::max)),
            Prepared::Quantile { lo, hi } => Ok((lo - theta[0]).max(theta[0] - hi)),
        }
    }

    pub fn score_rows(&self, thetas: ArrayView2<f64>) -> Result<Vec<f64>> {
        thetas
            .rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.score(s),
                None => self.score(&r.to_vec()),
            })
            .collect()
    }

    /// Scores of `n` fresh surrogate draws, sorted.
    pub fn sample_scores(&self, rng: &mut Rng, n: usize) -> Result<SortedScores> {
        let draws = self.cond.sample(rng, n)?;
        SortedScores::new(self.score_rows(draws.view())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::std_normal_pdf;
    use crate::surrogate::SurrogateSpec;
    use crate::tasks::{Task, TaskConfig, TaskName};
    use crate::transform::ParameterTransform;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    /// Surrogate whose first coordinate is N(0, 1) at x = 0.
    fn standard_normal(spec: SurrogateSpec) -> Arc<SurrogatePosterior> {
        let task = Task::with_config(
            TaskName::GaussianLinear,
            TaskConfig {
                dim: 1,
                prior_var: 2.0,
                noise_var: 2.0,
                ..Default::default()
            },
        )
        .unwrap();
        Arc::new(SurrogatePosterior::fit(&spec, &task, None).unwrap())
    }

    fn score_fn(kind: ScoreKind, s: Arc<SurrogatePosterior>) -> ScoreFunction {
        ScoreFunction::new(&ScoreSpec::new(kind), s, 0.1, 9).unwrap()
    }

    #[test]
    fn hpd_at_mode_of_standard_normal() {
        let f = score_fn(ScoreKind::HpdDensity, standard_normal(SurrogateSpec::oracle()));
        assert_relative_eq!(f.score(&[0.0], &[0.0]).unwrap(), -0.398_942_280_401_432_7, epsilon = 1e-15);
        assert!(f.score(&[0.0], &[0.0]).unwrap() < f.score(&[0.3], &[0.0]).unwrap());
    }

    #[test]
    fn hpd_orders_like_oracle_density() {
        let task = Task::new(TaskName::GaussianLinear);
        let f = score_fn(ScoreKind::HpdDensity, Arc::new(SurrogatePosterior::oracle(&task)));
        let x = vec![0.1; 10];
        let at = f.at(&x).unwrap();
        let thetas = task.prior_sample(&mut stream(2, &[]), 100);
        let mut pairs: Vec<(f64, f64)> = thetas
            .rows()
            .into_iter()
            .map(|r| {
                let t = r.to_vec();
                (at.score(&t).unwrap(), task.oracle_posterior_logdensity(&t, &x).unwrap().value)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn scott_rule_closed_forms() {
        // Sample sd of {−1.5, −0.5, 0.5, 1.5} repeated is rescaled to 1.
        let base = [-1.5, -0.5, 0.5, 1.5];
        let raw: Vec<f64> = (0..16).map(|i| base[i % 4]).collect();
        let sd = sample_variance(&raw).sqrt();
        let s = Array2::from_shape_fn((16, 1), |(i, _)| raw[i] / sd);
        assert_relative_eq!(scott_bandwidth(s.view()).unwrap().0[0], 0.574_349_177_498_517_6, epsilon = 1e-12);

        let n = 1000;
        let col: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let sd = sample_variance(&col).sqrt();
        let s = Array2::from_shape_fn((n, 2), |(i, j)| col[i] / sd * (j as f64 + 1.0));
        let h = scott_bandwidth(s.view()).unwrap().0;
        assert_relative_eq!(h[0], 0.316_227_766_016_837_94, epsilon = 1e-12);
        assert_relative_eq!(h[1], 0.632_455_532_033_675_9, epsilon = 1e-12);
    }

    #[test]
    fn scott_rule_rejects_degenerate_input() {
        assert!(scott_bandwidth(array![[1.0]].view()).is_err());
        assert!(matches!(
            scott_bandwidth(array![[1.0, 2.0], [1.0, 3.0]].view()),
            Err(Error::ZeroVariance(0))
        ));
    }

    #[test]
    fn kde_single_kernel() {
        let s = kde_hpd_score(array![[0.0]].view(), &Bandwidth(vec![1.0]), &[0.0]).unwrap();
        assert_relative_eq!(s, -0.398_942_280_401_432_7, epsilon = 1e-15);
    }

    #[test]
    fn kde_monotone_in_distance() {
        let samples = Array2::from_shape_fn((50, 1), |(i, _)| (i as f64 - 25.0) * 1e-3);
        let bw = scott_bandwidth(samples.view()).unwrap();
        let h = bw.0[0];
        let near = kde_hpd_score(samples.view(), &bw, &[0.0]).unwrap();
        let far = kde_hpd_score(samples.view(), &bw, &[5.0 * h]).unwrap();
        assert!(near < far && far < 0.0);
    }

    #[test]
    fn kde_consistent_for_normal_draws() {
        let s = standard_normal(SurrogateSpec::oracle());
        let draws = s.sample(&[0.0], &mut stream(8, &[]), 10_000).unwrap();
        let bw = scott_bandwidth(draws.view()).unwrap();
        let v = kde_hpd_score(draws.view(), &bw, &[0.0]).unwrap();
        assert!((v / -std_normal_pdf(0.0) - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn kde_integrates_to_one_on_grid() {
        let task = Task::new(TaskName::GaussianMixture);
        let s = Arc::new(SurrogatePosterior::oracle(&task));
        let draws = s.sample(&[0.3, -0.2], &mut stream(1, &[]), 300).unwrap();
        let bw = scott_bandwidth(draws.view()).unwrap();
        let lo: Vec<f64> = (0..2)
            .map(|j| draws.column(j).iter().cloned().fold(f64::INFINITY, f64::min) - 5.0 * bw.0[j])
            .collect();
        let hi: Vec<f64> = (0..2)
            .map(|j| draws.column(j).iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 5.0 * bw.0[j])
            .collect();
        let n = 300;
        let (w0, w1) = ((hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64);
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let t = [lo[0] + (i as f64 + 0.5) * w0, lo[1] + (j as f64 + 0.5) * w1];
                total -= kde_hpd_score(draws.view(), &bw, &t).unwrap() * w0 * w1;
            }
        }
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }

    #[test]
    fn symmetric_score_standardizes() {
        let f = score_fn(ScoreKind::Symmetric, standard_normal(SurrogateSpec::oracle()));
        assert_eq!(f.score(&[0.0], &[0.0]).unwrap(), 0.0);
        assert_relative_eq!(f.score(&[2.0], &[0.0]).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_score_translation_invariant() {
        // Sample-based moments: the grid surrogate has no Gaussian closed form.
        let task = Task::new(TaskName::GaussianLinearUniform);
        let oracle = SurrogatePosterior::oracle(&task);
        let shifted = SurrogatePosterior::oracle(&task)
            .with_transform(ParameterTransform::Affine {
                matrix: (0..10).map(|i| (0..10).map(|j| (i == j) as u8 as f64).collect()).collect(),
                offset: vec![0.7; 10],
            })
            .unwrap();
        let a = score_fn(ScoreKind::Symmetric, Arc::new(oracle));
        let b = score_fn(ScoreKind::Symmetric, Arc::new(shifted));
        let x = vec![0.2; 10];
        let theta = vec![0.35; 10];
        let moved: Vec<f64> = theta.iter().map(|t| t + 0.7).collect();
        assert_relative_eq!(
            a.score(&theta, &x).unwrap(),
            b.score(&moved, &x).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn quantile_score_cases() {
        let s = standard_normal(SurrogateSpec::oracle());
        let spec = ScoreSpec {
            kind: ScoreKind::Quantile,
            draws: 1000,
            alpha1: Some(0.05),
            alpha2: Some(0.95),
        };
        let f = ScoreFunction::new(&spec, s, 0.1, 0).unwrap();
        assert_relative_eq!(f.score(&[2.0], &[0.0]).unwrap(), 2.0 - 1.644_853_626_951_472_2, epsilon = 1e-9);
        assert!(f.score(&[0.5], &[0.0]).unwrap() < 0.0);
        assert!(f.score(&[1.644_853_626_951_472_2], &[0.0]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn quantile_score_validates_levels_and_dimension() {
        let s = standard_normal(SurrogateSpec::oracle());
        let bad = ScoreSpec {
            kind: ScoreKind::Quantile,
            draws: 1000,
            alpha1: Some(0.1),
            alpha2: Some(0.95),
        };
        assert!(ScoreFunction::new(&bad, s, 0.1, 0).is_err());
        let task = Task::new(TaskName::TwoMoons);
        let moons = Arc::new(SurrogatePosterior::oracle(&task));
        assert!(ScoreFunction::new(&ScoreSpec::new(ScoreKind::Quantile), moons, 0.1, 0).is_err());
    }

    #[test]
    fn ecdf_examples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ecdf_transform(2.5, &s).unwrap(), 0.5);
        assert_eq!(ecdf_transform(0.0, &s).unwrap(), 0.0);
        assert_eq!(ecdf_transform(4.0, &s).unwrap(), 1.0);
        assert!(ecdf_transform(1.0, &[]).is_err());
        let sorted = SortedScores::new(s.to_vec()).unwrap();
        assert_eq!(sorted.quantile(1.0), 4.0);
        assert_eq!(sorted.quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(sorted.quantile(0.5), 2.0);
        assert_eq!(sorted.quantile(0.51), 3.0);
    }

    #[test]
    fn hpd_requires_density() {
        let s = standard_normal(SurrogateSpec {
            kind: crate::surrogate::SurrogateKind::SampleOnly,
            gamma: 1.0,
            shift: vec![],
        });
        assert!(matches!(
            ScoreFunction::new(&ScoreSpec::new(ScoreKind::HpdDensity), s.clone(), 0.1, 0),
            Err(Error::UnsupportedDensity)
        ));
        assert!(ScoreFunction::new(&ScoreSpec::new(ScoreKind::HpdKde), s, 0.1, 0).is_ok());
    }

    #[test]
    fn pit_cutoff_edges() {
        let d = SortedScores::new(vec![1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.pit_cutoff(1.0), f64::INFINITY);
        assert_eq!(d.pit_cutoff(0.75), 3.0f64.next_down());
        // Level 0.5 cannot admit one copy of a tied pair without the other.
        assert_eq!(d.pit_cutoff(0.5), 2.0f64.next_down());
        assert_eq!(d.pit_cutoff(0.25), 2.0f64.next_down());
        assert_eq!(d.pit_cutoff(0.0), 1.0f64.next_down());
    }

    proptest! {
        #[test]
        fn pit_cutoff_agrees_with_ecdf(
            samples in prop::collection::vec(-5i32..5, 1..30),
            j in 0usize..31,
            probe in prop::collection::vec(-6i32..6, 1..20),
        ) {
            let d = SortedScores::new(samples.iter().map(|&v| v as f64 * 0.5).collect()).unwrap();
            let level = j.min(d.len()) as f64 / d.len() as f64;
            let c = d.pit_cutoff(level);
            for p in probe {
                let s = p as f64 * 0.5;
                prop_assert_eq!(s <= c, d.ecdf(s) <= level);
            }
        }

        #[test]
        fn ecdf_matches_count_and_is_monotone(
            samples in prop::collection::vec(-5.0f64..5.0, 1..40),
            a in -6.0f64..6.0,
            b in -6.0f64..6.0,
        ) {
            let sorted = SortedScores::new(samples.clone()).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert_eq!(sorted.ecdf(lo), ecdf_transform(lo, &samples).unwrap());
            prop_assert!(sorted.ecdf(lo) <= sorted.ecdf(hi));
            let m = samples.len() as f64;
            let k = sorted.ecdf(lo) * m;
            prop_assert!((k - k.round()).abs() < 1e-9);
        }

        #[test]
        fn quantile_inverts_ecdf(samples in prop::collection::vec(-5.0f64..5.0, 1..40), u in 0.0f64..=1.0) {
            let sorted = SortedScores::new(samples).unwrap();
            let q = sorted.quantile(u);
            prop_assert!(sorted.ecdf(q) >= u - 1e-12);
        }

        #[test]
        fn bandwidth_is_scale_homogeneous(c in 0.01f64..100.0, seed in 0u64..1000) {
            let s = standard_normal(SurrogateSpec::oracle()).sample(&[0.0], &mut stream(seed, &[]), 20).unwrap();
            let h = scott_bandwidth(s.view()).unwrap().0[0];
            let hc = scott_bandwidth((&s * c).view()).unwrap().0[0];
            prop_assert!((hc / (c * h) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn density_scaling_keeps_hpd_order(t1 in -3.0f64..3.0, t2 in -3.0f64..3.0, gamma in 0.2f64..2.0) {
            // Multiplying the density by c > 0 multiplies every HPD score by c.
            let f = score_fn(ScoreKind::HpdDensity, standard_normal(SurrogateSpec::variance_scaled(gamma)));
            let at = f.at(&[0.0]).unwrap();
            let (s1, s2) = (at.score(&[t1]).unwrap(), at.score(&[t2]).unwrap());
            let c = 3.7;
            prop_assert_eq!(s1 < s2, c * s1 < c * s2);
        }
    }
}
