//! CSV outputs. Column order is fixed by the field order of the row types;
//! floats are written in shortest round-trip form and missing values as
//! empty cells.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvaluationResult, ExperimentOutcome};
use crate::env::FieldKind;
use crate::error::{Error, Result};
use crate::learners::IterationRecord;

/// Header line of `metrics.csv`.
pub const METRICS_HEADER: &str = "iteration,world,beta,dataset_size,training_crashes,planner_faults,\
learner_actions,learner_queries,mean_stage_cost,mean_kl,kl_exceed_frac,train_loss,eval_mttf,\
eval_crash_rate,snapshot";

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub world: FieldKind,
    pub beta: f64,
    pub dataset_size: usize,
    pub training_crashes: usize,
    pub planner_faults: usize,
    pub learner_actions: usize,
    pub learner_queries: usize,
    pub mean_stage_cost: f64,
    pub mean_kl: Option<f64>,
    pub kl_exceed_frac: Option<f64>,
    pub train_loss: Option<f64>,
    /// Mean time to failure of this iteration's policy (s).
    pub eval_mttf: f64,
    pub eval_crash_rate: f64,
    /// Snapshot path relative to the run directory.
    pub snapshot: String,
}

impl MetricsRow {
    pub fn new(record: &IterationRecord, evaluation: &EvaluationResult, kl_epsilon: f64, snapshot: String) -> Self {
        MetricsRow {
            iteration: record.iteration,
            world: record.world,
            beta: record.beta,
            dataset_size: record.dataset_size,
            training_crashes: record.training_crashes,
            planner_faults: record.planner_faults,
            learner_actions: record.learner_actions,
            learner_queries: record.learner_queries,
            mean_stage_cost: record.mean_stage_cost,
            mean_kl: record.mean_kl(),
            kl_exceed_frac: record.kl_exceed_fraction(kl_epsilon),
            train_loss: record.train_loss,
            eval_mttf: evaluation.mttf(),
            eval_crash_rate: evaluation.crash_rate(),
            snapshot,
        }
    }
}

pub(crate) fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        writer.write_record(METRICS_HEADER.split(','))?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != METRICS_HEADER {
        return Err(Error::Config(format!("unexpected metrics header: {header}")));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub(crate) fn write_timing(path: &Path, timing: &[(String, usize, f64)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["phase", "iteration", "seconds"])?;
    for (phase, iteration, seconds) in timing {
        writer.write_record([phase.clone(), iteration.to_string(), seconds.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Summary of one λ in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// Mean executed stage cost over all training steps.
    pub teacher_cost: f64,
    pub training_crashes: usize,
    pub final_mttf: f64,
    /// Mean realized KL between teacher and learner over all training steps.
    pub mean_kl: Option<f64>,
}

impl SweepRow {
    pub fn from_outcome(lambda: f64, outcome: &ExperimentOutcome) -> Self {
        let records = &outcome.history.records;
        let n = records.len().max(1) as f64;
        let kl: Vec<f64> = records.iter().flat_map(|r| r.kl.iter().copied()).collect();
        SweepRow {
            lambda,
            teacher_cost: records.iter().map(|r| r.mean_stage_cost).sum::<f64>() / n,
            training_crashes: outcome.history.total_crashes(),
            final_mttf: outcome.final_mttf(),
            mean_kl: (!kl.is_empty()).then(|| kl.iter().sum::<f64>() / kl.len() as f64),
        }
    }
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

const BARS: [char; 8] = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'];

/// One block character per value, scaled between the series min and max.
pub fn sparkline(values: &[f64]) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| {
            if !v.is_finite() {
                ' '
            } else if hi - lo <= 0.0 {
                BARS[3]
            } else {
                let level = ((v - lo) / (hi - lo) * (BARS.len() - 1) as f64).round() as usize;
                BARS[level.min(BARS.len() - 1)]
            }
        })
        .collect()
}

/// Plain-text summary of a metrics file: one sparkline per key column with
/// its first and last values.
pub fn summarize_metrics(path: impl AsRef<Path>) -> Result<String> {
    let rows = read_metrics(path)?;
    let columns: [(&str, Vec<f64>); 4] = [
        ("eval_mttf", rows.iter().map(|r| r.eval_mttf).collect()),
        ("training_crashes", rows.iter().map(|r| r.training_crashes as f64).collect()),
        ("mean_kl", rows.iter().map(|r| r.mean_kl.unwrap_or(f64::NAN)).collect()),
        ("train_loss", rows.iter().map(|r| r.train_loss.unwrap_or(f64::NAN)).collect()),
    ];
    let mut out = format!("{} iterations\n", rows.len());
    for (name, values) in columns {
        let first = values.first().copied().unwrap_or(f64::NAN);
        let last = values.last().copied().unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{name:<17} {} {first:.3} -> {last:.3}\n",
            sparkline(&values)
        ));
    }
    Ok(out)
}
