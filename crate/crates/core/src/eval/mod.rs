//! Coverage metrics and the repeated-experiment harness.
//!
//! Each repetition draws fresh training, calibration, test and evaluation
//! data from seeds derived from `(seed, task, repetition)`, so a report is
//! a pure function of its configuration.

mod experiment;
mod metrics;
mod report;

pub use experiment::{
    fit_repetition, repetition_seed, run_experiment, run_repetition, ExperimentConfig,
    ExperimentReport, Fitted, MethodSummary, RepetitionFailure, RepetitionResult,
};
pub use metrics::{
    amc, conditional_coverage, confidence_interval, ks_pvalue, ks_uniform_statistic, mae, Interval,
};
pub use report::{read_repetitions_csv, summarize, write_summary_csv, Metric, RepetitionValue, SummaryRow};
