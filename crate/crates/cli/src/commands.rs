use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use log::info;
use serde::Serialize;

use credible::conformal::{cell_masses, grid_mass, hpd_mask, rasterize, RasterBox, RegionManifest};
use credible::eval::{
    fit_repetition, read_repetitions_csv, run_experiment, summarize, write_summary_csv,
    ExperimentConfig,
};
use credible::rng::stream;
use credible::surrogate::SurrogatePosterior;
use credible::{ParameterTransform, Task, TaskConfig, TaskName};

use crate::config::{ConfigError, RegionSection};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Runs the sweep; returns whether every repetition succeeded.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_json(out, "manifest.json", cfg)?;
    let report = run_experiment(cfg)?;

    let mut w = create(out, "report.csv")?;
    report.write_summary_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, "repetitions.csv")?;
    report.write_repetitions_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, "report.json")?;
    report.write_json(&mut w)?;
    w.flush()?;

    for f in &report.failures {
        log::error!("{} repetition {}: {}", f.task.as_str(), f.repetition, f.error);
    }
    info!(
        "{} repetitions failed; finished in {:.1} s",
        report.failures.len(),
        report.runtime_seconds
    );
    Ok(report.is_complete())
}

#[derive(Serialize)]
struct RegionRecord {
    method: String,
    x_obs: Vec<f64>,
    raster: RasterBox,
    region: RegionManifest,
}

fn default_box(
    task: &Task,
    transform: &ParameterTransform,
    x: &[f64],
) -> Result<([f64; 2], [f64; 2])> {
    let pick = |lo: &[f64], hi: &[f64], coords: &[usize]| {
        ([lo[coords[0]], lo[coords[1]]], [hi[coords[0]], hi[coords[1]]])
    };
    if let Some((lo, hi)) = task.prior_box() {
        match transform {
            ParameterTransform::Identity => return Ok(pick(&lo, &hi, &[0, 1])),
            ParameterTransform::Select { coords } => return Ok(pick(&lo, &hi, coords)),
            ParameterTransform::Affine { .. } => {}
        }
    }
    let oracle = SurrogatePosterior::oracle(task)
        .with_transform(transform.clone())?
        .at(x)?;
    let (m, sd) = oracle.gaussian_moments().ok_or_else(|| {
        anyhow!("no default raster box for {}; set region.lo and region.hi", task.name.as_str())
    })?;
    Ok((
        [m[0] - 6.0 * sd[0], m[1] - 6.0 * sd[1]],
        [m[0] + 6.0 * sd[0], m[1] + 6.0 * sd[1]],
    ))
}

fn pair(key: &str, v: &[f64]) -> std::result::Result<[f64; 2], ConfigError> {
    v.try_into()
        .map_err(|_| ConfigError(anyhow!("{key} must have two entries, got {}", v.len())))
}

/// Rasterizes every configured method's region at one observation, alongside
/// the oracle HPD region of the same level.
pub fn region(cfg: &ExperimentConfig, section: &RegionSection, out: &Path) -> Result<()> {
    let name = match cfg.tasks.as_slice() {
        [n] => *n,
        _ => return Err(ConfigError(anyhow!("region needs exactly one task.name")).into()),
    };
    let task = Task::with_config(name, cfg.task_config.clone())?;
    let dim = cfg.transform.output_dim(task.theta_dim())?;
    if dim != 2 {
        return Err(ConfigError(anyhow!(
            "region needs a 2-dimensional parameter after transform, got {dim}"
        ))
        .into());
    }
    let x = section
        .x_obs
        .clone()
        .ok_or_else(|| ConfigError(anyhow!("missing required key `region.x_obs`")))?;
    if x.len() != task.x_dim() {
        return Err(ConfigError(anyhow!(
            "region.x_obs has {} entries, {} expects {}",
            x.len(),
            name.as_str(),
            task.x_dim()
        ))
        .into());
    }
    let resolution = section.resolution.unwrap_or(512);
    if resolution == 0 {
        return Err(ConfigError(anyhow!("region.resolution must be positive")).into());
    }
    let (lo, hi) = match (&section.lo, &section.hi) {
        (Some(lo), Some(hi)) => (pair("region.lo", lo)?, pair("region.hi", hi)?),
        (None, None) => default_box(&task, &cfg.transform, &x).map_err(ConfigError)?,
        _ => return Err(ConfigError(anyhow!("region.lo and region.hi go together")).into()),
    };
    let grid = RasterBox::new(lo, hi, resolution).map_err(|e| ConfigError(e.into()))?;

    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let fitted = fit_repetition(cfg, name, 0)?;
    let oracle = SurrogatePosterior::oracle(&task)
        .with_transform(cfg.transform.clone())?
        .at(&x)?;
    let masses = cell_masses(&oracle, &grid, cfg.execution)?;
    let truth = hpd_mask(&masses, &grid, 1.0 - cfg.alpha)?;
    let mut w = create(out, "mask_oracle.csv")?;
    truth.write_csv(&mut w)?;
    w.flush()?;

    let mut summary = csv::Writer::from_writer(create(out, "regions.csv")?);
    summary.write_record(["method", "cutoff", "cells", "area", "oracle_mass"])?;
    summary.write_record([
        "Oracle".to_string(),
        String::new(),
        truth.count().to_string(),
        truth.area().to_string(),
        grid_mass(&masses, &truth).to_string(),
    ])?;
    let mut records = Vec::new();
    for region in &fitted.regions {
        let method = region.method().as_str();
        let obs = region.observe(&x)?;
        let cutoff = region.cutoff_in(&obs)?;
        let raster = rasterize(region, &obs, &grid, cfg.execution)?;
        let mut w = create(out, &format!("mask_{method}.csv"))?;
        raster.write_csv(&mut w)?;
        w.flush()?;
        summary.write_record([
            method.to_string(),
            format!("{cutoff:?}"),
            raster.count().to_string(),
            raster.area().to_string(),
            grid_mass(&masses, &raster).to_string(),
        ])?;
        info!("{method}: {} cells, oracle mass {:.4}", raster.count(), grid_mass(&masses, &raster));
        records.push(RegionRecord {
            method: method.to_string(),
            x_obs: x.clone(),
            raster: grid,
            region: region.manifest(),
        });
    }
    summary.flush()?;
    write_json(out, "regions.json", &records)?;
    write_json(out, "manifest.json", cfg)?;
    Ok(())
}

pub fn dataset(
    name: TaskName,
    config: TaskConfig,
    size: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let task = Task::with_config(name, config).map_err(|e| ConfigError(e.into()))?;
    let data = task.generate_dataset(size, &mut stream(seed, &[name as u64]))?;
    match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            data.write_csv(BufWriter::new(f))?;
        }
        None => data.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

pub fn report(input: &Path, out: Option<&Path>) -> Result<()> {
    let f = File::open(input).with_context(|| format!("cannot open {}", input.display()))?;
    let values = read_repetitions_csv(f)?;
    let rows = summarize(&values)?;
    match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            write_summary_csv(&rows, BufWriter::new(f))?;
        }
        None => write_summary_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}
