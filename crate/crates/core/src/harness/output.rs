//! CSV tables. Arms, tasks and replications are numbered from 1 in output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scenario};
use super::run::RunResult;
use super::Metrics;
use crate::error::{Error, Result};
use crate::stopping::StopMode;

/// One row of `results.csv`: a single task of a single replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub algorithm: String,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub p_or_kind: String,
    pub sigma_eeg: String,
    pub replication: u64,
    pub task: usize,
    pub tau: u64,
    pub decided: usize,
    pub truth: usize,
    pub correct: u8,
    /// Per-task budget in fixed-budget mode, empty otherwise.
    pub budget: String,
    pub capped: u8,
}

fn sigma_eeg(cfg: &ExperimentConfig) -> String {
    if cfg.scenario == Scenario::P300 {
        cfg.sigma_eeg.to_string()
    } else {
        String::new()
    }
}

fn budget(cfg: &ExperimentConfig) -> String {
    if cfg.mode == StopMode::FixedBudget {
        cfg.t_max.to_string()
    } else {
        String::new()
    }
}

impl ResultRow {
    pub fn from_runs(cfg: &ExperimentConfig, num_arms: usize, runs: &[RunResult]) -> Vec<Self> {
        let p_or_kind = cfg.p_or_kind();
        let sigma = sigma_eeg(cfg);
        let budget = budget(cfg);
        runs.iter()
            .flat_map(|run| {
                run.tasks.iter().map(|t| ResultRow {
                    scenario: cfg.scenario.name().to_string(),
                    algorithm: cfg.algorithm.name().to_string(),
                    j: num_arms,
                    m: cfg.num_tasks,
                    p_or_kind: p_or_kind.clone(),
                    sigma_eeg: sigma.clone(),
                    replication: run.replication + 1,
                    task: t.task + 1,
                    tau: t.tau,
                    decided: t.decided + 1,
                    truth: t.truth + 1,
                    correct: t.correct as u8,
                    budget: budget.clone(),
                    capped: t.capped as u8,
                })
            })
            .collect()
    }
}

/// One row of `summary.csv`: aggregate metrics for one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub algorithm: String,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub p_or_kind: String,
    pub sigma_eeg: String,
    pub budget: String,
    pub replications: usize,
    pub avg_accuracy: f64,
    pub zero_one_accuracy: f64,
    pub mean_total_steps: f64,
    pub std_total_steps: f64,
    pub capped_tasks: usize,
}

impl SummaryRow {
    pub fn new(cfg: &ExperimentConfig, num_arms: usize, m: &Metrics) -> Self {
        Self {
            scenario: cfg.scenario.name().to_string(),
            algorithm: cfg.algorithm.name().to_string(),
            j: num_arms,
            m: cfg.num_tasks,
            p_or_kind: cfg.p_or_kind(),
            sigma_eeg: sigma_eeg(cfg),
            budget: budget(cfg),
            replications: m.replications,
            avg_accuracy: m.avg_accuracy,
            zero_one_accuracy: m.zero_one_accuracy,
            mean_total_steps: m.mean_total_steps,
            std_total_steps: m.std_total_steps,
            capped_tasks: m.capped_tasks,
        }
    }
}

/// One row of an allocation-trace table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub t: u64,
    pub kl: f64,
    pub p: String,
    pub replication: u64,
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const RESULT_HEADER: [&str; 14] = [
    "scenario",
    "algorithm",
    "J",
    "M",
    "p_or_kind",
    "sigma_eeg",
    "replication",
    "task",
    "tau",
    "decided",
    "truth",
    "correct",
    "budget",
    "capped",
];

const SUMMARY_HEADER: [&str; 13] = [
    "scenario",
    "algorithm",
    "J",
    "M",
    "p_or_kind",
    "sigma_eeg",
    "budget",
    "replications",
    "avg_accuracy",
    "zero_one_accuracy",
    "mean_total_steps",
    "std_total_steps",
    "capped_tasks",
];

pub fn write_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    write_rows(path.as_ref(), rows, &RESULT_HEADER)
}

pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    write_rows(path.as_ref(), rows, &SUMMARY_HEADER)
}

pub fn write_allocation_csv(path: impl AsRef<Path>, rows: &[AllocationRow]) -> Result<()> {
    write_rows(path.as_ref(), rows, &["t", "kl", "p", "replication"])
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
