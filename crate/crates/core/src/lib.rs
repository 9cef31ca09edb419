//! Conformal calibration of credible regions for simulation-based inference.
//!
//! A trained (or synthetic) posterior surrogate `q(θ | x)` induces a
//! conformity score `s(x, θ)`. Calibrating that score on simulated pairs
//! `(θᵢ, xᵢ)` gives regions `{θ : s(x, θ) ≤ t(x)}` whose coverage is
//! guaranteed marginally ([`conformal::Method::Global`]), approximately per
//! partition cell ([`conformal::Method::Locart`]), or locally through a
//! probability-integral transform ([`conformal::Method::Cdf`]).

pub mod error;
pub mod rng;
pub mod par;
pub mod stats;
pub mod transform;
pub mod dist;
pub mod grid;
pub mod tasks;
pub mod surrogate;
pub mod scores;
pub mod tree;
pub mod conformal;
pub mod eval;

pub use error::{Error, Result};
pub use par::Execution;
pub use tasks::{CalibrationSet, Distortion, Task, TaskConfig, TaskName};
pub use transform::ParameterTransform;
