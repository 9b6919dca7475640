//! Experiment orchestration: replications, metrics and CSV output.

mod config;
mod output;
mod run;

pub use config::{Algorithm, ExperimentConfig, Feedback, P300Reward, Scenario, P300_NONTARGET_AMP};
pub use output::{
    read_results_csv, write_allocation_csv, write_results_csv, write_summary_csv, AllocationRow, ResultRow, SummaryRow,
};
pub use run::{run_task_sequence, Experiment, RunResult, TaskResult};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stopping::StopMode;
use crate::theory::allocation_trace;

/// Aggregates over replications.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub replications: usize,
    /// Fraction of all tasks decided correctly.
    pub avg_accuracy: f64,
    /// Fraction of replications with every task decided correctly.
    pub zero_one_accuracy: f64,
    pub mean_total_steps: f64,
    /// Sample standard deviation of total steps (zero for one replication).
    pub std_total_steps: f64,
    pub capped_tasks: usize,
}

impl Metrics {
    pub fn from_runs(runs: &[RunResult]) -> Self {
        let b = runs.len();
        if b == 0 {
            return Self {
                replications: 0,
                avg_accuracy: f64::NAN,
                zero_one_accuracy: f64::NAN,
                mean_total_steps: f64::NAN,
                std_total_steps: f64::NAN,
                capped_tasks: 0,
            };
        }
        let n_tasks: usize = runs.iter().map(|r| r.tasks.len()).sum();
        let correct: usize = runs.iter().map(RunResult::n_correct).sum();
        let perfect = runs.iter().filter(|r| r.all_correct()).count();
        let steps: Vec<f64> = runs.iter().map(|r| r.total_steps() as f64).collect();
        let mean = steps.iter().sum::<f64>() / b as f64;
        let std = if b > 1 {
            (steps.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (b - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            replications: b,
            avg_accuracy: correct as f64 / n_tasks as f64,
            zero_one_accuracy: perfect as f64 / b as f64,
            mean_total_steps: mean,
            std_total_steps: std,
            capped_tasks: runs.iter().flat_map(|r| &r.tasks).filter(|t| t.capped).count(),
        }
    }

    /// Monte Carlo standard error of `avg_accuracy`, treating replications
    /// as the independent units.
    pub fn accuracy_se(runs: &[RunResult]) -> f64 {
        let b = runs.len();
        if b < 2 {
            return 0.0;
        }
        let per: Vec<f64> = runs
            .iter()
            .map(|r| r.n_correct() as f64 / r.tasks.len() as f64)
            .collect();
        let mean = per.iter().sum::<f64>() / b as f64;
        let var = per.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub num_arms: usize,
    pub runs: Vec<RunResult>,
    pub metrics: Metrics,
}

impl ExperimentOutput {
    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow::new(&self.config, self.num_arms, &self.metrics)
    }

    pub fn result_rows(&self) -> Vec<ResultRow> {
        ResultRow::from_runs(&self.config, self.num_arms, &self.runs)
    }
}

/// Runs every replication (in parallel) and aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_with(cfg, true)
}

/// As [`run_experiment`], optionally on the calling thread only. Both give
/// identical results.
pub fn run_experiment_with(cfg: &ExperimentConfig, parallel: bool) -> Result<ExperimentOutput> {
    let exp = Experiment::prepare(cfg)?;
    let runs = exp.run_all(parallel)?;
    Ok(ExperimentOutput {
        config: cfg.clone(),
        num_arms: exp.num_arms(),
        metrics: Metrics::from_runs(&runs),
        runs,
    })
}

/// Runs each configuration of a grid in order.
pub fn sweep(configs: &[ExperimentConfig]) -> Result<Vec<ExperimentOutput>> {
    configs.iter().map(run_experiment).collect()
}

/// Template copies with one field changed per grid value.
pub fn grid<T: Clone>(
    template: &ExperimentConfig,
    values: &[T],
    set: impl Fn(&mut ExperimentConfig, T),
) -> Vec<ExperimentConfig> {
    values
        .iter()
        .map(|v| {
            let mut c = template.clone();
            set(&mut c, v.clone());
            c
        })
        .collect()
}

/// Mean KL divergence between the empirical and target allocations at each
/// checkpoint, averaged over tasks, one row per replication and checkpoint.
/// Runs `cfg` in budget mode with `t_max` set to the last checkpoint.
pub fn allocation_traces(cfg: &ExperimentConfig, checkpoints: &[u64]) -> Result<Vec<AllocationRow>> {
    let last = *checkpoints
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("checkpoints", "need at least one checkpoint"))?;
    let mut c = cfg.clone();
    c.mode = StopMode::FixedBudget;
    c.t_max = last;
    c.record_pulls = true;
    let exp = Experiment::prepare(&c)?;
    let runs = exp.run_all(true)?;
    let j = exp.num_arms();
    let label = c.p_or_kind();
    let mut rows = Vec::new();
    for run in &runs {
        let mut sums = vec![0.0; checkpoints.len()];
        for task in &run.tasks {
            let pulls = task.pulls.as_deref().unwrap_or_default();
            let trace = allocation_trace(pulls, j, task.truth, c.beta, checkpoints)?;
            for (t, kl) in trace {
                let i = checkpoints.iter().position(|&x| x == t).expect("checkpoint from input");
                sums[i] += kl;
            }
        }
        for (i, &t) in checkpoints.iter().enumerate() {
            rows.push(AllocationRow {
                t,
                kl: sums[i] / run.tasks.len() as f64,
                p: label.clone(),
                replication: run.replication + 1,
            });
        }
    }
    Ok(rows)
}
