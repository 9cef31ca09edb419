use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentReport, MethodSummary};
use super::metrics::{confidence_interval, Interval};
use crate::conformal::Method;
use crate::error::{Error, Result};
use crate::tasks::TaskName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "AMC")]
    Amc,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Mae => "MAE",
            Metric::Amc => "AMC",
        }
    }
}

/// One line of `repetitions.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionValue {
    pub task: TaskName,
    pub method: Method,
    pub metric: Metric,
    pub repetition: usize,
    pub value: f64,
}

/// One line of `report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub task: TaskName,
    pub method: Method,
    pub metric: Metric,
    pub interval: Option<Interval>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.summaries
            .iter()
            .flat_map(|s| {
                [(Metric::Mae, s.mae), (Metric::Amc, s.amc)].map(|(metric, interval)| SummaryRow {
                    task: s.task,
                    method: s.method,
                    metric,
                    interval,
                })
            })
            .collect()
    }

    pub fn repetition_values(&self) -> Vec<RepetitionValue> {
        let mut out = Vec::new();
        for s in &self.summaries {
            push_values(&mut out, s, Metric::Mae, &s.mae_values);
            push_values(&mut out, s, Metric::Amc, &s.amc_values);
        }
        out
    }

    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_summary_csv(&self.summary_rows(), writer)
    }

    pub fn write_repetitions_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["task", "method", "metric", "repetition", "value"])?;
        for v in self.repetition_values() {
            w.write_record([
                v.task.as_str(),
                v.method.as_str(),
                v.metric.as_str(),
                &v.repetition.to_string(),
                &v.value.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Full report, including configuration, failures and runtime.
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

fn push_values(out: &mut Vec<RepetitionValue>, s: &MethodSummary, metric: Metric, values: &[f64]) {
    for (&repetition, &value) in s.repetitions.iter().zip(values) {
        out.push(RepetitionValue {
            task: s.task,
            method: s.method,
            metric,
            repetition,
            value,
        });
    }
}

/// Writes `task,method,metric,mean,lo,hi`; an empty cell marks a metric
/// with no completed repetition.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["task", "method", "metric", "mean", "lo", "hi"])?;
    for r in rows {
        w.write_record([
            r.task.as_str().to_string(),
            r.method.as_str().to_string(),
            r.metric.as_str().to_string(),
            fmt_opt(r.interval.map(|i| i.mean)),
            fmt_opt(r.interval.map(|i| i.lo)),
            fmt_opt(r.interval.map(|i| i.hi)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_repetitions_csv<R: Read>(reader: R) -> Result<Vec<RepetitionValue>> {
    let mut r = csv::Reader::from_reader(reader);
    let expected = ["task", "method", "metric", "repetition", "value"];
    if r.headers()?.iter().ne(expected) {
        return Err(Error::InvalidArgument(format!(
            "repetitions csv header must be `{}`",
            expected.join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Aggregates per-repetition values into interval rows, keeping the order
/// in which (task, method, metric) groups first appear.
pub fn summarize(values: &[RepetitionValue]) -> Result<Vec<SummaryRow>> {
    let mut keys: Vec<(TaskName, Method, Metric)> = Vec::new();
    for v in values {
        let k = (v.task, v.method, v.metric);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(task, method, metric)| {
            let vals: Vec<f64> = values
                .iter()
                .filter(|v| (v.task, v.method, v.metric) == (task, method, metric))
                .map(|v| v.value)
                .collect();
            Ok(SummaryRow {
                task,
                method,
                metric,
                interval: Some(confidence_interval(&vals)?),
            })
        })
        .collect()
}
