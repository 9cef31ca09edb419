use std::io::Write;

use serde::{Deserialize, Serialize};

use super::region::{CalibratedRegion, Observation};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::surrogate::Conditional;

/// A regular grid of cell centers over a 2D box. Row index follows θ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub resolution: usize,
}

impl RasterBox {
    pub fn new(lo: [f64; 2], hi: [f64; 2], resolution: usize) -> Result<Self> {
        if resolution == 0 || !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::InvalidArgument(
                "raster box needs lo < hi and a positive resolution".into(),
            ));
        }
        Ok(RasterBox { lo, hi, resolution })
    }

    pub fn cells(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn cell_center(&self, k: usize) -> [f64; 2] {
        let (i, j) = (k / self.resolution, k % self.resolution);
        let w = self.widths();
        [
            self.lo[0] + (i as f64 + 0.5) * w[0],
            self.lo[1] + (j as f64 + 0.5) * w[1],
        ]
    }

    pub fn widths(&self) -> [f64; 2] {
        [
            (self.hi[0] - self.lo[0]) / self.resolution as f64,
            (self.hi[1] - self.lo[1]) / self.resolution as f64,
        ]
    }

    pub fn cell_area(&self) -> f64 {
        let w = self.widths();
        w[0] * w[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub grid: RasterBox,
    pub inside: Vec<bool>,
}

impl Raster {
    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.grid.cell_area()
    }

    /// CSV with header `theta_0,theta_1,inside`, one row per cell.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["theta_0", "theta_1", "inside"])?;
        for (k, &b) in self.inside.iter().enumerate() {
            let c = self.grid.cell_center(k);
            w.write_record([c[0].to_string(), c[1].to_string(), (b as u8).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_2d(dim: usize) -> Result<()> {
    if dim != 2 {
        return Err(Error::InvalidArgument(format!(
            "rasterization needs a 2-dimensional parameter, got {dim}"
        )));
    }
    Ok(())
}

/// Membership of every cell center in the region at the observation.
pub fn rasterize(
    region: &CalibratedRegion,
    obs: &Observation,
    grid: &RasterBox,
    execution: Execution,
) -> Result<Raster> {
    check_2d(region.score_function().theta_dim())?;
    let cutoff = region.cutoff_in(obs)?;
    let inside = execution.try_map(grid.cells(), |k| {
        Ok::<_, Error>(obs.score(&grid.cell_center(k))? <= cutoff)
    })?;
    Ok(Raster { grid: *grid, inside })
}

/// Density at each cell center times cell area, normalized to sum to one.
pub fn cell_masses(cond: &Conditional, grid: &RasterBox, execution: Execution) -> Result<Vec<f64>> {
    check_2d(cond.dim())?;
    let mut m = execution.try_map(grid.cells(), |k| cond.log_density(&grid.cell_center(k)))?;
    let peak = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::InvalidArgument("density vanishes on the raster".into()));
    }
    for v in &mut m {
        *v = (*v - peak).exp();
    }
    let total: f64 = m.iter().sum();
    for v in &mut m {
        *v /= total;
    }
    Ok(m)
}

/// The smallest set of highest-density cells holding at least `level` mass.
pub fn hpd_mask(masses: &[f64], grid: &RasterBox, level: f64) -> Result<Raster> {
    if masses.len() != grid.cells() {
        return Err(Error::DimensionMismatch {
            expected: grid.cells(),
            got: masses.len(),
        });
    }
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&a, &b| masses[b].total_cmp(&masses[a]));
    let mut inside = vec![false; masses.len()];
    let mut acc = 0.0;
    for k in order {
        if acc >= level {
            break;
        }
        inside[k] = true;
        acc += masses[k];
    }
    Ok(Raster { grid: *grid, inside })
}

/// Mass of the cells inside the mask.
pub fn grid_mass(masses: &[f64], raster: &Raster) -> f64 {
    masses
        .iter()
        .zip(&raster.inside)
        .filter(|(_, &b)| b)
        .map(|(m, _)| m)
        .sum()
}
