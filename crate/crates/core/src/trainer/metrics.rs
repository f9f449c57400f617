//! CSV output with fixed column orders.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::experiment::{AcceptanceCheck, RunResult, VariantSummary};
use super::{IterationRecord, TrainerError};

/// Columns of the per-iteration metrics file. Experiment files prepend
/// `variant,task,seed`.
pub const ITERATION_COLUMNS: [&str; 12] = [
    "iteration",
    "rollout_count",
    "mean_reward",
    "mean_progress_reward",
    "rollout_success_rate",
    "eval_success_rate",
    "eval_progress",
    "suggestion_probability",
    "hinted_fraction",
    "update_applied",
    "c_hat",
    "weights",
];

pub const RUN_COLUMNS: [&str; 11] = [
    "variant",
    "task",
    "seed",
    "iterations_to_threshold",
    "iterations_to_090",
    "effective_iterations",
    "pre_success_rate",
    "final_success_rate",
    "final_progress",
    "rollout_count",
    "budget",
];

pub const SUMMARY_COLUMNS: [&str; 8] = [
    "variant",
    "runs",
    "censored_runs",
    "median_iterations",
    "median_iterations_090",
    "median_pre_success_rate",
    "median_final_success_rate",
    "median_final_progress",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn iteration_fields(r: &IterationRecord) -> Vec<String> {
    vec![
        r.iteration.to_string(),
        r.rollout_count.to_string(),
        r.mean_reward.to_string(),
        r.mean_progress_reward.to_string(),
        r.rollout_success_rate.to_string(),
        opt(r.eval_success_rate),
        opt(r.eval_progress),
        r.suggestion_probability.to_string(),
        r.hinted_fraction.to_string(),
        r.update_applied.to_string(),
        list(&r.c_hat),
        list(&r.weights),
    ]
}

/// Incremental per-iteration writer; every row is flushed.
pub struct IterationCsv<W: Write> {
    writer: csv::Writer<W>,
}

impl IterationCsv<File> {
    pub fn create(path: &Path) -> Result<Self, TrainerError> {
        Self::new(File::create(path)?)
    }
}

impl<W: Write> IterationCsv<W> {
    pub fn new(out: W) -> Result<Self, TrainerError> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(ITERATION_COLUMNS)?;
        writer.flush()?;
        Ok(IterationCsv { writer })
    }

    pub fn write(&mut self, record: &IterationRecord) -> Result<(), TrainerError> {
        self.writer.write_record(iteration_fields(record))?;
        self.writer.flush()?;
        Ok(())
    }
}

pub fn write_iterations_csv(path: &Path, runs: &[RunResult]) -> Result<(), TrainerError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(
        ["variant", "task", "seed"]
            .into_iter()
            .chain(ITERATION_COLUMNS),
    )?;
    for run in runs {
        for r in &run.records {
            let mut row = vec![
                run.variant.clone(),
                run.task_id.clone(),
                run.seed.to_string(),
            ];
            row.extend(iteration_fields(r));
            w.write_record(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs_csv(path: &Path, runs: &[RunResult]) -> Result<(), TrainerError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RUN_COLUMNS)?;
    for r in runs {
        w.write_record([
            r.variant.clone(),
            r.task_id.clone(),
            r.seed.to_string(),
            opt(r.iterations_to_threshold),
            opt(r.iterations_to_090),
            r.effective_iterations().to_string(),
            r.pre_success_rate.to_string(),
            r.final_success_rate.to_string(),
            r.final_progress.to_string(),
            r.rollout_count.to_string(),
            r.budget.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, summaries: &[VariantSummary]) -> Result<(), TrainerError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_COLUMNS)?;
    for s in summaries {
        w.write_record([
            s.variant.clone(),
            s.runs.to_string(),
            s.censored_runs.to_string(),
            s.median_iterations.to_string(),
            s.median_iterations_090.to_string(),
            s.median_pre_success_rate.to_string(),
            s.median_final_success_rate.to_string(),
            s.median_final_progress.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_checks_csv(path: &Path, checks: &[AcceptanceCheck]) -> Result<(), TrainerError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["check", "observed", "bound", "passed"])?;
    for c in checks {
        w.write_record([
            c.name.clone(),
            c.observed.to_string(),
            c.bound.to_string(),
            c.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
