//! Experiment configuration files. See `docs/config.md` for the grammar.

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use credible::conformal::{LocartConfig, Method};
use credible::eval::ExperimentConfig;
use credible::scores::{ScoreKind, ScoreSpec};
use credible::surrogate::{SurrogateKind, SurrogateSpec};
use credible::{Execution, ParameterTransform, TaskConfig, TaskName};

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub execution: Option<String>,
    pub task: Option<TaskSection>,
    pub surrogate: Option<SurrogateSection>,
    pub score: Option<ScoreSection>,
    pub conformal: Option<ConformalSection>,
    pub locart: Option<LocartSection>,
    pub eval: Option<EvalSection>,
    pub transform: Option<TransformSection>,
    pub region: Option<RegionSection>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub name: Option<OneOrMany>,
    pub dim: Option<usize>,
    pub prior_var: Option<f64>,
    pub noise_var: Option<f64>,
    pub uniform_bound: Option<f64>,
    pub moons_bound: Option<f64>,
    pub moons_radius_mean: Option<f64>,
    pub moons_radius_sd: Option<f64>,
    pub moons_offset: Option<f64>,
    pub mixture_bound: Option<f64>,
    pub mixture_factor: Option<f64>,
    pub mixture_broad_var: Option<f64>,
    pub mixture_narrow_var: Option<f64>,
    pub hetero_prior_var: Option<f64>,
    pub hetero_posterior_sd: Option<f64>,
    pub hetero_scale_ratio: Option<f64>,
    pub grid_resolution: Option<usize>,
    pub importance_pool: Option<usize>,
    pub rejection_cap: Option<usize>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSection {
    pub kind: Option<String>,
    pub gamma: Option<f64>,
    pub shift: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    pub kind: Option<String>,
    pub draws: Option<usize>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalSection {
    pub methods: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub draws: Option<usize>,
    pub self_draws: Option<usize>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LocartSection {
    pub min_samples_leaf: Option<usize>,
    pub ccp_alpha: Option<f64>,
    pub augment: Option<bool>,
    pub split_calibration: Option<bool>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub budget: Option<usize>,
    pub train_fraction: Option<f64>,
    pub test_size: Option<usize>,
    pub eval_size: Option<usize>,
    pub coverage_draws: Option<usize>,
    pub repetitions: Option<usize>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    pub select: Option<Vec<usize>>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub offset: Option<Vec<f64>>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub x_obs: Option<Vec<f64>>,
    pub resolution: Option<usize>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
}

/// A configuration problem; the process exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn load(path: &Path) -> std::result::Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .map_err(ConfigError)?;
    parse(&text).map_err(|e| ConfigError(e.context(format!("in {}", path.display()))))
}

pub fn parse(text: &str) -> Result<FileConfig> {
    toml::from_str(text).map_err(|e| anyhow!("{e}"))
}

fn parse_enum<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("{key}: {e}"))
}

fn positive(key: &str, v: Option<usize>) -> Result<Option<usize>> {
    match v {
        Some(0) => bail!("{key} must be positive"),
        v => Ok(v),
    }
}

fn open_unit(key: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x < 1.0) => bail!("{key} must lie in (0, 1), got {x}"),
        v => Ok(v),
    }
}

fn set<T>(target: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *target = v;
    }
}

impl FileConfig {
    pub fn task_names(&self) -> Result<Vec<TaskName>> {
        let name = self
            .task
            .as_ref()
            .and_then(|t| t.name.clone())
            .ok_or_else(|| anyhow!("missing required key `task.name`"))?;
        let names = match name {
            OneOrMany::One(n) => vec![n],
            OneOrMany::Many(v) => v,
        };
        if names.is_empty() {
            bail!("task.name must list at least one task");
        }
        names.iter().map(|n| parse_enum("task.name", n)).collect()
    }

    pub fn task_config(&self) -> Result<TaskConfig> {
        let mut c = TaskConfig::default();
        if let Some(t) = &self.task {
            set(&mut c.dim, positive("task.dim", t.dim)?);
            set(&mut c.prior_var, t.prior_var);
            set(&mut c.noise_var, t.noise_var);
            set(&mut c.uniform_bound, t.uniform_bound);
            set(&mut c.moons_bound, t.moons_bound);
            set(&mut c.moons_radius_mean, t.moons_radius_mean);
            set(&mut c.moons_radius_sd, t.moons_radius_sd);
            set(&mut c.moons_offset, t.moons_offset);
            set(&mut c.mixture_bound, t.mixture_bound);
            set(&mut c.mixture_factor, t.mixture_factor);
            set(&mut c.mixture_broad_var, t.mixture_broad_var);
            set(&mut c.mixture_narrow_var, t.mixture_narrow_var);
            set(&mut c.hetero_prior_var, t.hetero_prior_var);
            set(&mut c.hetero_posterior_sd, t.hetero_posterior_sd);
            set(&mut c.hetero_scale_ratio, t.hetero_scale_ratio);
            set(&mut c.grid_resolution, positive("task.grid_resolution", t.grid_resolution)?);
            set(&mut c.importance_pool, positive("task.importance_pool", t.importance_pool)?);
            set(&mut c.rejection_cap, positive("task.rejection_cap", t.rejection_cap)?);
        }
        Ok(c)
    }

    fn surrogate(&self) -> Result<SurrogateSpec> {
        let mut s = SurrogateSpec::default();
        if let Some(sec) = &self.surrogate {
            if let Some(k) = &sec.kind {
                s.kind = parse_enum::<SurrogateKind>("surrogate.kind", k)?;
            }
            if let Some(g) = sec.gamma {
                if !(g > 0.0) {
                    bail!("surrogate.gamma must be positive, got {g}");
                }
                s.gamma = g;
            }
            set(&mut s.shift, sec.shift.clone());
        }
        Ok(s)
    }

    fn score(&self) -> Result<ScoreSpec> {
        let mut s = ScoreSpec::default();
        if let Some(sec) = &self.score {
            if let Some(k) = &sec.kind {
                s.kind = parse_enum::<ScoreKind>("score.kind", k)?;
            }
            set(&mut s.draws, positive("score.draws", sec.draws)?);
            s.alpha1 = open_unit("score.alpha1", sec.alpha1)?;
            s.alpha2 = open_unit("score.alpha2", sec.alpha2)?;
        }
        Ok(s)
    }

    fn transform(&self) -> Result<ParameterTransform> {
        let Some(t) = &self.transform else {
            return Ok(ParameterTransform::Identity);
        };
        match (&t.select, &t.matrix, &t.offset) {
            (None, None, None) => Ok(ParameterTransform::Identity),
            (Some(c), None, None) => Ok(ParameterTransform::select(c.clone())),
            (None, Some(m), offset) => Ok(ParameterTransform::Affine {
                matrix: m.clone(),
                offset: offset.clone().unwrap_or_else(|| vec![0.0; m.len()]),
            }),
            (None, None, Some(_)) => bail!("transform.offset needs transform.matrix"),
            (Some(_), _, _) => bail!("transform.select cannot be combined with transform.matrix"),
        }
    }

    fn locart(&self) -> Result<LocartConfig> {
        let mut l = LocartConfig::default();
        if let Some(sec) = &self.locart {
            l.min_samples_leaf = positive("locart.min_samples_leaf", sec.min_samples_leaf)?
                .or(l.min_samples_leaf);
            if let Some(a) = sec.ccp_alpha {
                if !(a >= 0.0) {
                    bail!("locart.ccp_alpha must be nonnegative, got {a}");
                }
                l.ccp_alpha = a;
            }
            set(&mut l.augment, sec.augment);
            set(&mut l.split_calibration, sec.split_calibration);
        }
        Ok(l)
    }

    fn execution(&self) -> Result<Execution> {
        match self.execution.as_deref() {
            None => Ok(Execution::default()),
            Some(s) if s.eq_ignore_ascii_case("parallel") => Ok(Execution::Parallel),
            Some(s) if s.eq_ignore_ascii_case("sequential") => Ok(Execution::Sequential),
            Some(s) => bail!("execution must be `parallel` or `sequential`, got `{s}`"),
        }
    }

    /// The effective experiment, with `seed` overriding the file's value.
    pub fn experiment(&self, seed: Option<u64>) -> std::result::Result<ExperimentConfig, ConfigError> {
        self.build(seed).map_err(ConfigError)
    }

    fn build(&self, seed: Option<u64>) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig {
            tasks: self.task_names()?,
            task_config: self.task_config()?,
            surrogate: self.surrogate()?,
            score: self.score()?,
            locart: self.locart()?,
            transform: self.transform()?,
            execution: self.execution()?,
            seed: seed.or(self.seed).unwrap_or(0),
            ..ExperimentConfig::default()
        };
        if let Some(c) = &self.conformal {
            if let Some(m) = &c.methods {
                if m.is_empty() {
                    bail!("conformal.methods must list at least one method");
                }
                cfg.methods = m
                    .iter()
                    .map(|s| parse_enum::<Method>("conformal.methods", s))
                    .collect::<Result<_>>()?;
            }
            set(&mut cfg.alpha, open_unit("conformal.alpha", c.alpha)?);
            set(&mut cfg.draws, positive("conformal.draws", c.draws)?);
            set(&mut cfg.self_draws, positive("conformal.self_draws", c.self_draws)?);
        }
        if let Some(e) = &self.eval {
            set(&mut cfg.budget, positive("eval.budget", e.budget)?);
            set(&mut cfg.train_fraction, open_unit("eval.train_fraction", e.train_fraction)?);
            set(&mut cfg.test_size, positive("eval.test_size", e.test_size)?);
            set(&mut cfg.eval_size, positive("eval.eval_size", e.eval_size)?);
            set(&mut cfg.coverage_draws, positive("eval.coverage_draws", e.coverage_draws)?);
            set(&mut cfg.repetitions, positive("eval.repetitions", e.repetitions)?);
        }
        cfg.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(cfg)
    }

    pub fn region(&self) -> RegionSection {
        self.region.clone().unwrap_or_default()
    }
}
