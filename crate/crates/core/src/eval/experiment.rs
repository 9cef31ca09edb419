use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::metrics::{confidence_interval, coverage_of_scores, Interval};
use crate::conformal::{
    apply_transform, calibrate, observe, CalibratedRegion, CalibrationConfig, DrawSettings,
    LocartConfig, Method, Needs,
};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rng::{derive, stream};
use crate::scores::{ScoreFunction, ScoreSpec};
use crate::surrogate::{SurrogatePosterior, SurrogateSpec};
use crate::tasks::{Task, TaskConfig, TaskName};
use crate::transform::ParameterTransform;

const STAGE_TRAIN: u64 = 1;
const STAGE_CALIB: u64 = 2;
const STAGE_TEST: u64 = 3;
const STAGE_EVAL: u64 = 4;
const STAGE_ORACLE: u64 = 5;
const STAGE_DRAWS: u64 = 6;
const STAGE_SCORE: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub tasks: Vec<TaskName>,
    pub task_config: TaskConfig,
    pub surrogate: SurrogateSpec,
    pub score: ScoreSpec,
    pub methods: Vec<Method>,
    pub alpha: f64,
    /// Simulation budget split between training and calibration.
    pub budget: usize,
    pub train_fraction: f64,
    pub test_size: usize,
    /// Observations at which conditional coverage is estimated.
    pub eval_size: usize,
    /// Oracle draws per evaluation observation.
    pub coverage_draws: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Surrogate draws per observation for PIT values and variance features.
    pub draws: usize,
    pub self_draws: usize,
    pub locart: LocartConfig,
    pub transform: ParameterTransform,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tasks: TaskName::BENCHMARK.to_vec(),
            task_config: TaskConfig::default(),
            surrogate: SurrogateSpec::default(),
            score: ScoreSpec::default(),
            methods: Method::ALL.to_vec(),
            alpha: 0.1,
            budget: 10_000,
            train_fraction: 0.8,
            test_size: 2000,
            eval_size: 100,
            coverage_draws: 1000,
            repetitions: 10,
            seed: 0,
            draws: 1000,
            self_draws: 1000,
            locart: LocartConfig::default(),
            transform: ParameterTransform::Identity,
            execution: Execution::default(),
        }
    }
}

impl ExperimentConfig {
    /// Size of the training share of the budget.
    pub fn train_size(&self) -> usize {
        (self.budget as f64 * self.train_fraction).round() as usize
    }

    pub fn calibration_size(&self) -> usize {
        self.budget - self.train_size()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.tasks.is_empty() {
            return bad("at least one task is required");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        let counts = [
            ("budget", self.budget),
            ("test_size", self.test_size),
            ("eval_size", self.eval_size),
            ("coverage_draws", self.coverage_draws),
            ("repetitions", self.repetitions),
            ("draws", self.draws),
            ("self_draws", self.self_draws),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, c)| *c == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if self.calibration_size() == 0 || self.train_size() == 0 {
            return bad("budget too small to split between training and calibration");
        }
        for &name in &self.tasks {
            let task = Task::with_config(name, self.task_config.clone())?;
            self.transform.output_dim(task.theta_dim())?;
        }
        Ok(())
    }
}

/// Metric values of one repetition on one task, one entry per configured method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub mae: Vec<f64>,
    pub amc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionFailure {
    pub task: TaskName,
    pub repetition: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub task: TaskName,
    pub method: Method,
    /// `None` when every repetition failed.
    pub mae: Option<Interval>,
    pub amc: Option<Interval>,
    /// Indices of the repetitions behind the values below.
    pub repetitions: Vec<usize>,
    pub mae_values: Vec<f64>,
    pub amc_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub summaries: Vec<MethodSummary>,
    pub failures: Vec<RepetitionFailure>,
    pub runtime_seconds: f64,
}

impl ExperimentReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self, task: TaskName, method: Method) -> Option<&MethodSummary> {
        self.summaries
            .iter()
            .find(|s| s.task == task && s.method == method)
    }
}

/// Seed of one repetition on one task.
pub fn repetition_seed(seed: u64, task: TaskName, repetition: usize) -> u64 {
    derive(seed, &[task as u64, repetition as u64])
}

/// Everything a repetition builds before any metric is computed.
pub struct Fitted {
    pub task: Task,
    pub score: ScoreFunction,
    pub regions: Vec<CalibratedRegion>,
    pub settings: DrawSettings,
}

/// Fits the surrogate and calibrates every configured method for one repetition.
pub fn fit_repetition(cfg: &ExperimentConfig, name: TaskName, repetition: usize) -> Result<Fitted> {
    let seed = repetition_seed(cfg.seed, name, repetition);
    let task = Task::with_config(name, cfg.task_config.clone())?;
    let train = if cfg.surrogate.needs_training() {
        Some(task.generate_dataset(cfg.train_size(), &mut stream(seed, &[STAGE_TRAIN]))?)
    } else {
        None
    };
    let calib = task.generate_dataset(cfg.calibration_size(), &mut stream(seed, &[STAGE_CALIB]))?;
    let calib = apply_transform(&calib, &cfg.transform)?;
    let surrogate = SurrogatePosterior::fit(&cfg.surrogate, &task, train.as_ref())?
        .with_transform(cfg.transform.clone())?;
    let score = ScoreFunction::new(
        &cfg.score,
        Arc::new(surrogate),
        cfg.alpha,
        derive(seed, &[STAGE_SCORE]),
    )?;
    let settings = DrawSettings {
        seed: derive(seed, &[STAGE_DRAWS]),
        draws: cfg.draws,
        self_draws: cfg.self_draws,
    };
    let ccfg = CalibrationConfig {
        alpha: cfg.alpha,
        draws: settings,
        locart: cfg.locart.clone(),
        execution: cfg.execution,
    };
    let regions = calibrate(&cfg.methods, &score, &calib, &ccfg)?;
    Ok(Fitted {
        task,
        score,
        regions,
        settings,
    })
}

fn union_needs(regions: &[CalibratedRegion]) -> Needs {
    regions.iter().fold(Needs::default(), |n, r| n | r.needs())
}

/// One repetition on one task: calibrate, then measure MAE and AMC per method.
pub fn run_repetition(
    cfg: &ExperimentConfig,
    name: TaskName,
    repetition: usize,
) -> Result<RepetitionResult> {
    let seed = repetition_seed(cfg.seed, name, repetition);
    let fitted = fit_repetition(cfg, name, repetition)?;
    let Fitted {
        task,
        score,
        regions,
        settings,
    } = &fitted;
    let needs = union_needs(regions);
    let m = regions.len();

    let test = task.generate_dataset(cfg.test_size, &mut stream(seed, &[STAGE_TEST]))?;
    let test = apply_transform(&test, &cfg.transform)?;
    let hits = cfg.execution.try_map(test.len(), |i| {
        let obs = observe(score, test.x_row(i), *settings, needs)?;
        let s = obs.score(test.theta_row(i))?;
        regions
            .iter()
            .map(|r| Ok(s <= r.cutoff_in(&obs)?))
            .collect::<Result<Vec<bool>>>()
    })?;
    let amc: Vec<f64> = (0..m)
        .map(|j| hits.iter().filter(|h| h[j]).count() as f64 / hits.len() as f64)
        .collect();

    let eval = task.generate_dataset(cfg.eval_size, &mut stream(seed, &[STAGE_EVAL]))?;
    let coverages = cfg.execution.try_map(eval.len(), |i| {
        let x = eval.x_row(i);
        let raw = task.oracle_posterior_sample(
            x,
            &mut stream(seed, &[STAGE_ORACLE, i as u64]),
            cfg.coverage_draws,
        )?;
        let draws = transform_rows(&raw, &cfg.transform)?;
        let obs = observe(score, x, *settings, needs)?;
        let scores = obs.score_at().score_rows(draws.view())?;
        regions
            .iter()
            .map(|r| Ok(coverage_of_scores(&scores, r.cutoff_in(&obs)?)))
            .collect::<Result<Vec<f64>>>()
    })?;
    let target = 1.0 - cfg.alpha;
    let mae: Vec<f64> = (0..m)
        .map(|j| {
            coverages.iter().map(|c| (c[j] - target).abs()).sum::<f64>() / coverages.len() as f64
        })
        .collect();

    Ok(RepetitionResult {
        repetition,
        mae,
        amc,
    })
}

pub(crate) fn transform_rows(rows: &Array2<f64>, g: &ParameterTransform) -> Result<Array2<f64>> {
    if g.is_identity() {
        return Ok(rows.clone());
    }
    let d = g.output_dim(rows.ncols())?;
    let mut out = Array2::zeros((rows.nrows(), d));
    for (i, row) in rows.outer_iter().enumerate() {
        let phi = g.apply(row.as_slice().expect("row-major"));
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&phi));
    }
    Ok(out)
}

/// Runs every repetition of every task. A failing repetition is recorded
/// and left out of the aggregates; the run continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for &name in &cfg.tasks {
        let mut done = Vec::new();
        for r in 0..cfg.repetitions {
            let t = Instant::now();
            match run_repetition(cfg, name, r) {
                Ok(res) => {
                    log::info!("{name} repetition {r} finished in {:.1?}", t.elapsed());
                    done.push(res);
                }
                Err(e) => {
                    log::error!("{name} repetition {r} failed: {e}");
                    failures.push(RepetitionFailure {
                        task: name,
                        repetition: r,
                        error: e.to_string(),
                    });
                }
            }
        }
        for (j, &method) in cfg.methods.iter().enumerate() {
            let mae_values: Vec<f64> = done.iter().map(|r| r.mae[j]).collect();
            let amc_values: Vec<f64> = done.iter().map(|r| r.amc[j]).collect();
            summaries.push(MethodSummary {
                task: name,
                method,
                mae: confidence_interval(&mae_values).ok(),
                amc: confidence_interval(&amc_values).ok(),
                repetitions: done.iter().map(|r| r.repetition).collect(),
                mae_values,
                amc_values,
            });
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        summaries,
        failures,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}
