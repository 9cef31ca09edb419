use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{conformal_quantile, Method};
use crate::error::{check_dim, Error, Result};
use crate::par::Execution;
use crate::rng::stream_at;
use crate::scores::{ScoreAt, ScoreFunction, SortedScores};
use crate::tasks::CalibrationSet;
use crate::tree::RegressionTree;

const TAG_DRAWS: u64 = 0xd4a3;
const TAG_SELF_DRAWS: u64 = 0x5e1f;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocartConfig {
    /// `None` picks 300 for calibration sets of at least 2000 pairs, else 75.
    pub min_samples_leaf: Option<usize>,
    pub ccp_alpha: f64,
    /// Append the variance of surrogate-draw scores to the tree features.
    pub augment: bool,
    /// Fit the tree on the first half and set leaf cutoffs on the second.
    pub split_calibration: bool,
}

impl Default for LocartConfig {
    fn default() -> Self {
        LocartConfig {
            min_samples_leaf: None,
            ccp_alpha: 0.0,
            augment: true,
            split_calibration: false,
        }
    }
}

impl LocartConfig {
    pub fn min_leaf_for(&self, n: usize) -> usize {
        self.min_samples_leaf
            .unwrap_or(if n >= 2000 { 300 } else { 75 })
    }
}

/// Surrogate draw budgets and the seed their per-observation streams derive from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawSettings {
    pub seed: u64,
    /// Draws per observation for PIT values, CDF/HDR cutoffs and variance features.
    pub draws: usize,
    /// Draws per observation for self-calibration.
    pub self_draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub alpha: f64,
    pub draws: DrawSettings,
    pub locart: LocartConfig,
    pub execution: Execution,
}

impl CalibrationConfig {
    pub fn new(alpha: f64, seed: u64) -> Self {
        CalibrationConfig {
            alpha,
            draws: DrawSettings {
                seed,
                draws: 1000,
                self_draws: 1000,
            },
            locart: LocartConfig::default(),
            execution: Execution::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
        }
        if self.draws.draws == 0 || self.draws.self_draws == 0 {
            return Err(Error::InvalidArgument(
                "calibration draw budgets must be positive".into(),
            ));
        }
        if !(self.locart.ccp_alpha >= 0.0) {
            return Err(Error::InvalidArgument("locart.ccp_alpha must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Which per-observation surrogate draws a region reads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Needs {
    pub draws: bool,
    pub self_draws: bool,
}

impl std::ops::BitOr for Needs {
    type Output = Needs;

    fn bitor(self, o: Needs) -> Needs {
        Needs {
            draws: self.draws || o.draws,
            self_draws: self.self_draws || o.self_draws,
        }
    }
}

/// Everything any region needs at one observation: the score at `x` and
/// sorted scores of surrogate draws from streams keyed by `x`.
#[derive(Debug, Clone)]
pub struct Observation {
    at: ScoreAt,
    settings: DrawSettings,
    draws: Option<SortedScores>,
    self_draws: Option<SortedScores>,
}

pub fn observe(
    score: &ScoreFunction,
    x: &[f64],
    settings: DrawSettings,
    needs: Needs,
) -> Result<Observation> {
    let at = score.at(x)?;
    let draws = if needs.draws {
        Some(at.sample_scores(&mut stream_at(settings.seed, TAG_DRAWS, x), settings.draws)?)
    } else {
        None
    };
    let self_draws = match (&draws, needs.self_draws) {
        (_, false) => None,
        (Some(d), true) if settings.self_draws == settings.draws => Some(d.clone()),
        (_, true) => Some(at.sample_scores(
            &mut stream_at(settings.seed, TAG_SELF_DRAWS, x),
            settings.self_draws,
        )?),
    };
    Ok(Observation {
        at,
        settings,
        draws,
        self_draws,
    })
}

impl Observation {
    pub fn x(&self) -> &[f64] {
        self.at.x()
    }

    pub fn score_at(&self) -> &ScoreAt {
        &self.at
    }

    pub fn score(&self, theta: &[f64]) -> Result<f64> {
        self.at.score(theta)
    }

    fn draws(&self) -> Result<&SortedScores> {
        self.draws
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("observation lacks surrogate draws".into()))
    }

    fn self_draws(&self) -> Result<&SortedScores> {
        self.self_draws.as_ref().ok_or_else(|| {
            Error::InvalidArgument("observation lacks self-calibration draws".into())
        })
    }

    /// Sample variance of the surrogate-draw scores.
    pub fn score_variance(&self) -> Result<f64> {
        Ok(self.draws()?.variance())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RegionState {
    Global {
        threshold: f64,
    },
    Locart {
        tree: RegressionTree,
        thresholds: Vec<f64>,
        /// Calibration scores behind each leaf's threshold.
        counts: Vec<usize>,
        augment: bool,
    },
    /// Conformal quantile `t′` of the PIT values.
    Cdf {
        level: f64,
    },
    SelfCalib,
    /// Plain quantile `u*` of the PIT values.
    Hdr {
        level: f64,
    },
}

#[derive(Debug, Clone)]
pub struct CalibratedRegion {
    alpha: f64,
    score: ScoreFunction,
    settings: DrawSettings,
    state: RegionState,
}

/// Serializable record of a region's frozen state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionManifest {
    pub alpha: f64,
    pub score: crate::scores::ScoreKind,
    pub draws: DrawSettings,
    pub state: RegionState,
}

impl CalibratedRegion {
    pub fn method(&self) -> Method {
        match self.state {
            RegionState::Global { .. } => Method::Global,
            RegionState::Locart { .. } => Method::Locart,
            RegionState::Cdf { .. } => Method::Cdf,
            RegionState::SelfCalib => Method::SelfCalib,
            RegionState::Hdr { .. } => Method::Hdr,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn state(&self) -> &RegionState {
        &self.state
    }

    pub fn score_function(&self) -> &ScoreFunction {
        &self.score
    }

    pub fn settings(&self) -> DrawSettings {
        self.settings
    }

    pub fn needs(&self) -> Needs {
        match &self.state {
            RegionState::Global { .. } => Needs::default(),
            RegionState::Locart { augment, .. } => Needs {
                draws: *augment,
                self_draws: false,
            },
            RegionState::Cdf { .. } | RegionState::Hdr { .. } => Needs {
                draws: true,
                self_draws: false,
            },
            RegionState::SelfCalib => Needs {
                draws: false,
                self_draws: true,
            },
        }
    }

    pub fn observe(&self, x: &[f64]) -> Result<Observation> {
        observe(&self.score, x, self.settings, self.needs())
    }

    /// Threshold on the raw score scale at the observation.
    pub fn cutoff_in(&self, obs: &Observation) -> Result<f64> {
        if obs.settings != self.settings {
            return Err(Error::InvalidArgument(
                "observation was drawn with different settings".into(),
            ));
        }
        match &self.state {
            RegionState::Global { threshold } => Ok(*threshold),
            RegionState::Locart { thresholds, .. } => {
                let leaf = self.leaf_in(obs)?.expect("locart region has a partition");
                Ok(thresholds[leaf])
            }
            RegionState::Cdf { level } | RegionState::Hdr { level } => {
                Ok(obs.draws()?.pit_cutoff(*level))
            }
            RegionState::SelfCalib => Ok(obs.self_draws()?.quantile(1.0 - self.alpha)),
        }
    }

    /// Leaf of the LoCart partition containing the observation; `None` for
    /// other methods.
    pub fn leaf_in(&self, obs: &Observation) -> Result<Option<usize>> {
        match &self.state {
            RegionState::Locart { tree, augment, .. } => {
                let mut f = obs.x().to_vec();
                if *augment {
                    f.push(obs.score_variance()?);
                }
                Ok(Some(tree.leaf_of(&f)?))
            }
            _ => Ok(None),
        }
    }

    pub fn contains_in(&self, obs: &Observation, theta: &[f64]) -> Result<bool> {
        Ok(obs.score(theta)? <= self.cutoff_in(obs)?)
    }

    pub fn cutoff_at(&self, x: &[f64]) -> Result<f64> {
        self.cutoff_in(&self.observe(x)?)
    }

    pub fn contains(&self, theta: &[f64], x: &[f64]) -> Result<bool> {
        self.contains_in(&self.observe(x)?, theta)
    }

    pub fn manifest(&self) -> RegionManifest {
        RegionManifest {
            alpha: self.alpha,
            score: self.score.kind(),
            draws: self.settings,
            state: self.state.clone(),
        }
    }
}

/// Per-pair quantities shared by every method.
struct Summary {
    scores: Vec<f64>,
    pit: Vec<f64>,
    variance: Vec<f64>,
}

fn summarize(
    score: &ScoreFunction,
    calib: &CalibrationSet,
    cfg: &CalibrationConfig,
    needs_draws: bool,
) -> Result<Summary> {
    let needs = Needs {
        draws: needs_draws,
        self_draws: false,
    };
    let rows = cfg.execution.try_map(calib.len(), |i| {
        let obs = observe(score, calib.x_row(i), cfg.draws, needs)?;
        let s = obs.score(calib.theta_row(i))?;
        let (pit, var) = match &obs.draws {
            Some(d) => (d.ecdf(s), d.variance()),
            None => (f64::NAN, f64::NAN),
        };
        Ok::<_, Error>((s, pit, var))
    })?;
    Ok(Summary {
        scores: rows.iter().map(|r| r.0).collect(),
        pit: rows.iter().map(|r| r.1).collect(),
        variance: rows.iter().map(|r| r.2).collect(),
    })
}

/// Calibrates several methods on one calibration set, sharing the
/// per-pair score evaluations and surrogate draws.
pub fn calibrate(
    methods: &[Method],
    score: &ScoreFunction,
    calib: &CalibrationSet,
    cfg: &CalibrationConfig,
) -> Result<Vec<CalibratedRegion>> {
    cfg.validate()?;
    if calib.is_empty() {
        return Err(Error::EmptyInput("calibration set"));
    }
    check_dim(score.theta_dim(), calib.theta_dim())?;
    let needs_draws = methods.iter().any(|m| match m {
        Method::Cdf | Method::Hdr => true,
        Method::Locart => cfg.locart.augment,
        _ => false,
    });
    let summary = summarize(score, calib, cfg, needs_draws)?;
    methods
        .iter()
        .map(|&m| {
            let state = match m {
                Method::Global => RegionState::Global {
                    threshold: conformal_quantile(&summary.scores, cfg.alpha)?,
                },
                Method::Locart => locart_state(&summary, calib, cfg)?,
                Method::Cdf => RegionState::Cdf {
                    level: conformal_quantile(&summary.pit, cfg.alpha)?,
                },
                Method::SelfCalib => RegionState::SelfCalib,
                Method::Hdr => {
                    let pit = SortedScores::new(summary.pit.clone())?;
                    RegionState::Hdr {
                        level: pit.quantile(1.0 - cfg.alpha),
                    }
                }
            };
            Ok(CalibratedRegion {
                alpha: cfg.alpha,
                score: score.clone(),
                settings: cfg.draws,
                state,
            })
        })
        .collect()
}

fn locart_state(
    summary: &Summary,
    calib: &CalibrationSet,
    cfg: &CalibrationConfig,
) -> Result<RegionState> {
    let n = calib.len();
    let augment = cfg.locart.augment;
    let k = calib.x_dim() + augment as usize;
    let features = Array2::from_shape_fn((n, k), |(i, j)| {
        if j < calib.x_dim() {
            calib.x[(i, j)]
        } else {
            summary.variance[i]
        }
    });
    let (fit_idx, cal_idx): (Vec<usize>, Vec<usize>) = if cfg.locart.split_calibration {
        ((0..n / 2).collect(), (n / 2..n).collect())
    } else {
        ((0..n).collect(), (0..n).collect())
    };
    if fit_idx.is_empty() || cal_idx.is_empty() {
        return Err(Error::EmptyInput("locart split calibration needs at least two pairs"));
    }
    let min_leaf = cfg.locart.min_leaf_for(cal_idx.len());
    let fit_features = features.select(ndarray::Axis(0), &fit_idx);
    let fit_scores: Vec<f64> = fit_idx.iter().map(|&i| summary.scores[i]).collect();
    let tree = RegressionTree::fit(fit_features.view(), &fit_scores, min_leaf, cfg.locart.ccp_alpha)?;
    let mut per_leaf = vec![Vec::new(); tree.n_leaves()];
    for &i in &cal_idx {
        let leaf = tree.leaf_of(features.row(i).as_slice().expect("row-major"))?;
        per_leaf[leaf].push(summary.scores[i]);
    }
    let thresholds = per_leaf
        .iter()
        .enumerate()
        .map(|(leaf, s)| {
            if s.is_empty() {
                log::warn!("locart leaf {leaf} has no calibration scores; its region is unbounded");
                Ok(f64::INFINITY)
            } else {
                conformal_quantile(s, cfg.alpha)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RegionState::Locart {
        tree,
        thresholds,
        counts: per_leaf.iter().map(Vec::len).collect(),
        augment,
    })
}

fn single(
    method: Method,
    score: &ScoreFunction,
    calib: &CalibrationSet,
    cfg: &CalibrationConfig,
) -> Result<CalibratedRegion> {
    Ok(calibrate(&[method], score, calib, cfg)?.remove(0))
}

pub fn calibrate_global(
    score: &ScoreFunction,
    calib: &CalibrationSet,
    cfg: &CalibrationConfig,
) -> Result<CalibratedRegion> {
    single(Method::Global, score, calib, cfg)
}

pub fn calibrate_locart(
    score: &ScoreFunction,
    calib: &CalibrationSet,
    cfg: &CalibrationConfig,
) -> Result<CalibratedRegion> {
    single(Method::Locart, score, calib, cfg)
}

pub fn calibrate_cdf(
    score: &ScoreFunction,
    calib: &CalibrationSet,
    cfg: &CalibrationConfig,
) -> Result<CalibratedRegion> {
    single(Method::Cdf, score, calib, cfg)
}

pub fn calibrate_hdr(
    score: &ScoreFunction,
    calib: &CalibrationSet,
    cfg: &CalibrationConfig,
) -> Result<CalibratedRegion> {
    single(Method::Hdr, score, calib, cfg)
}

/// Self-calibration reads no calibration data.
pub fn calibrate_self(score: &ScoreFunction, cfg: &CalibrationConfig) -> Result<CalibratedRegion> {
    cfg.validate()?;
    Ok(CalibratedRegion {
        alpha: cfg.alpha,
        score: score.clone(),
        settings: cfg.draws,
        state: RegionState::SelfCalib,
    })
}

impl CalibratedRegion {
    /// PIT values `F̂(s(θᵢ; xᵢ) | xᵢ)` of a calibration set under this region's draws.
    pub fn pit_values(&self, calib: &CalibrationSet, execution: Execution) -> Result<Vec<f64>> {
        let cfg = CalibrationConfig {
            alpha: self.alpha,
            draws: self.settings,
            locart: LocartConfig::default(),
            execution,
        };
        Ok(summarize(&self.score, calib, &cfg, true)?.pit)
    }
}
