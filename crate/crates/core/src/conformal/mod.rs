//! Calibrated credible regions `{θ : s(θ; x) ≤ t(x)}`.
//!
//! | method      | cutoff `t(x)`                                                   |
//! |-------------|-----------------------------------------------------------------|
//! | `Global`    | conformal quantile of all calibration scores                    |
//! | `Locart`    | conformal quantile within the tree leaf containing `x`          |
//! | `Cdf`       | PIT value at most the conformal quantile of calibration PIT values |
//! | `SelfCalib` | surrogate score quantile at `1 − α`, no calibration data        |
//! | `Hdr`       | PIT value at most the plain `1 − α` quantile of calibration PIT values |
//!
//! The PIT value of `θ` at `x` is the fraction of surrogate draws at `x`
//! scoring at or below `s(θ; x)`. A PIT level `t′` becomes a raw-score
//! cutoff through [`crate::scores::SortedScores::pit_cutoff`]; at `t′ = 1`
//! the region is the whole space.

mod raster;
mod region;

pub use raster::{cell_masses, grid_mass, hpd_mask, rasterize, Raster, RasterBox};
pub use region::{
    calibrate, calibrate_cdf, calibrate_global, calibrate_hdr, calibrate_locart, calibrate_self,
    observe, CalibratedRegion, CalibrationConfig, DrawSettings, LocartConfig, Needs, Observation,
    RegionManifest, RegionState,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::ceil_rank;
use crate::tasks::CalibrationSet;
use crate::transform::ParameterTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Global,
    Locart,
    Cdf,
    SelfCalib,
    Hdr,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Global,
        Method::Locart,
        Method::Cdf,
        Method::SelfCalib,
        Method::Hdr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Global => "Global",
            Method::Locart => "Locart",
            Method::Cdf => "Cdf",
            Method::SelfCalib => "SelfCalib",
            Method::Hdr => "Hdr",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// The `⌈(n+1)(1−α)⌉`-th smallest score, or `+∞` when that rank exceeds `n`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("calibration scores"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("score is NaN".into()));
    }
    let n = scores.len();
    let k = ceil_rank(n + 1, 1.0 - alpha).max(1);
    if k > n {
        return Ok(f64::INFINITY);
    }
    let mut v = scores.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Replaces every θᵢ with g(θᵢ).
pub fn apply_transform(calib: &CalibrationSet, g: &ParameterTransform) -> Result<CalibrationSet> {
    let d = g.output_dim(calib.theta_dim())?;
    if g.is_identity() {
        return Ok(calib.clone());
    }
    let mut theta = ndarray::Array2::zeros((calib.len(), d));
    for i in 0..calib.len() {
        let phi = g.apply(calib.theta_row(i));
        theta.row_mut(i).assign(&ndarray::ArrayView1::from(&phi));
    }
    CalibrationSet::new(theta, calib.x.clone())
}
