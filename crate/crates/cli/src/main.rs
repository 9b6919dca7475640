//! `stts`: run sequential best-arm identification experiments from the shell.
//!
//! Every subcommand that takes a config accepts trailing `--key value` flags
//! naming any config key; they override the file.

mod config;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use stts_core::harness::{
    allocation_traces, run_experiment, write_allocation_csv, write_results_csv, write_summary_csv, ExperimentOutput,
    ResultRow, SummaryRow,
};
use stts_core::p300::{train_swlda, write_calibration, write_model, EegSimulator};
use stts_core::priors::{
    conditional_entropy, load_word_table_with_cap, markov_next_dist, MarkovPrior, DEFAULT_VOCAB_CAP,
};
use stts_core::theory::{error_bound, oracle_bound, BoundInputs, DEFAULT_CHECKPOINTS};
use stts_core::{Algorithm, ExperimentConfig, Purpose, RngStream, Scenario, StreamId};

use crate::config::{apply_override, load_config, load_table, parse_overrides, table_to_config};

const DEFAULT_OUT: &str = "out";

#[derive(Parser)]
#[command(
    name = "stts",
    version,
    about = "Sequential best-arm identification with informative priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration; writes results.csv and summary.csv.
    Run(ConfigArgs),
    /// Run a grid over one config key (and optionally several algorithms).
    Sweep(SweepArgs),
    /// Print the error bound (main, remainder, total) for a configuration.
    Bound(BoundArgs),
    /// Write allocation KL traces (t, kl, p, replication) to allocation.csv.
    Allocation(AllocationArgs),
    /// Generate speller calibration data, train the classifier and export both.
    GenCalibration(ConfigArgs),
    /// Check a word-table file and print its summary.
    ValidateTable(ValidateArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file with config keys; absent keys take their defaults.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// `--key value` overrides for any config key.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        load_config(self.config.as_deref(), &parse_overrides(&self.overrides)?)
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Config key to vary.
    #[arg(long)]
    axis: String,
    /// Comma-separated values for the axis key.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Comma-separated algorithms; defaults to the config's algorithm.
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<String>,
    #[command(flatten)]
    base: ConfigArgs,
}

#[derive(Args)]
struct BoundArgs {
    /// Budget per task.
    #[arg(long, default_value_t = 1000)]
    n: u64,
    /// Conditional entropy per task in nats; defaults to the config's prior.
    #[arg(long)]
    entropy: Option<f64>,
    #[command(flatten)]
    base: ConfigArgs,
}

#[derive(Args)]
struct AllocationArgs {
    /// Comma-separated checkpoints; the last one is the per-task budget.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<u64>,
    /// Comma-separated prior strengths, one trace set per value.
    #[arg(long, value_delimiter = ',')]
    p_values: Vec<String>,
    #[command(flatten)]
    base: ConfigArgs,
}

#[derive(Args)]
struct ValidateArgs {
    path: PathBuf,
    /// Largest accepted vocabulary.
    #[arg(long, default_value_t = DEFAULT_VOCAB_CAP)]
    cap: usize,
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_outputs(dir: &Path, outputs: &[ExperimentOutput]) -> Result<()> {
    let results: Vec<ResultRow> = outputs.iter().flat_map(|o| o.result_rows()).collect();
    let summary: Vec<SummaryRow> = outputs.iter().map(|o| o.summary_row()).collect();
    write_results_csv(dir.join("results.csv"), &results)?;
    write_summary_csv(dir.join("summary.csv"), &summary)?;
    Ok(())
}

fn print_summary(o: &ExperimentOutput) {
    let m = &o.metrics;
    println!(
        "{} {} J={} M={} p_or_kind={}: avg_accuracy {:.4}, zero_one_accuracy {:.4}, steps {:.1} ± {:.1}, capped {}",
        o.config.scenario.name(),
        o.config.algorithm.name(),
        o.num_arms,
        o.config.num_tasks,
        o.config.p_or_kind(),
        m.avg_accuracy,
        m.zero_one_accuracy,
        m.mean_total_steps,
        m.std_total_steps,
        m.capped_tasks,
    );
}

fn cmd_run(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    let out = run_experiment(&cfg)?;
    let dir = out_dir(&cfg)?;
    write_outputs(&dir, std::slice::from_ref(&out))?;
    print_summary(&out);
    println!("{}", serde_json::to_string(&out.summary_row())?);
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let overrides = parse_overrides(&args.base.overrides)?;
    let mut base = load_table(args.base.config.as_deref())?;
    for (k, v) in &overrides {
        apply_override(&mut base, k, v);
    }
    let axis = args.axis.replace('-', "_");
    let algorithms: Vec<Option<&str>> = if args.algorithms.is_empty() {
        vec![None]
    } else {
        args.algorithms.iter().map(|a| Some(a.as_str())).collect()
    };
    let mut outputs = Vec::new();
    for alg in &algorithms {
        for value in &args.values {
            let mut t = base.clone();
            if let Some(a) = alg {
                let parsed = Algorithm::parse(a).with_context(|| format!("unknown algorithm `{a}`"))?;
                apply_override(&mut t, "algorithm", parsed.name());
            }
            apply_override(&mut t, &axis, value);
            let cfg = table_to_config(&t).with_context(|| format!("{axis} = {value}"))?;
            let out = run_experiment(&cfg)?;
            print_summary(&out);
            outputs.push(out);
        }
    }
    let cfg = table_to_config(&base)?;
    write_outputs(&out_dir(&cfg)?, &outputs)?;
    Ok(())
}

/// Entropy of the prior over the next task's optimal arm, averaged over
/// contexts for the word table.
fn prior_entropy(cfg: &ExperimentConfig) -> Result<f64> {
    match cfg.scenario {
        Scenario::SyntheticMarkov => {
            let prior = MarkovPrior::new(cfg.prior_strength(), cfg.num_arms)?;
            Ok(conditional_entropy(&markov_next_dist(0, &prior)?)?)
        }
        Scenario::P300 => {
            let path = cfg.word_table.as_ref().context("p300 needs word_table")?;
            let h = load_word_table_with_cap(path, DEFAULT_VOCAB_CAP)?.row_entropies();
            Ok(h.iter().sum::<f64>() / h.len() as f64)
        }
        Scenario::GaussianU => bail!("gaussian_u priors are not categorical; pass --entropy"),
    }
}

fn cmd_bound(args: &BoundArgs) -> Result<()> {
    let cfg = args.base.load()?;
    let j = match cfg.scenario {
        Scenario::P300 => {
            let path = cfg.word_table.as_ref().context("p300 needs word_table")?;
            load_word_table_with_cap(path, DEFAULT_VOCAB_CAP)?.vocab().len()
        }
        _ => cfg.num_arms,
    };
    let h = match args.entropy {
        Some(h) => h,
        None => prior_entropy(&cfg)?,
    };
    let inputs = BoundInputs::uniform(args.n, j, cfg.num_tasks, cfg.gap, h);
    let b = error_bound(&inputs)?;
    let o = oracle_bound(&inputs)?;
    println!("n={} J={j} M={} gap={} entropy={h:.6}", args.n, cfg.num_tasks, cfg.gap);
    println!(
        "main={:.6e} remainder={:.6e} total={:.6e}",
        b.main, b.remainder, b.total
    );
    println!("oracle_error_sum={:.6e}", o.error_sum);
    Ok(())
}

fn cmd_allocation(args: &AllocationArgs) -> Result<()> {
    let checkpoints: Vec<u64> = if args.checkpoints.is_empty() {
        DEFAULT_CHECKPOINTS.to_vec()
    } else {
        args.checkpoints.clone()
    };
    let overrides = parse_overrides(&args.base.overrides)?;
    let mut table = load_table(args.base.config.as_deref())?;
    for (k, v) in &overrides {
        apply_override(&mut table, k, v);
    }
    let mut configs = Vec::new();
    if args.p_values.is_empty() {
        configs.push(table_to_config(&table)?);
    }
    for p in &args.p_values {
        let mut t = table.clone();
        apply_override(&mut t, "p", p);
        configs.push(table_to_config(&t)?);
    }
    let mut rows = Vec::new();
    for cfg in &configs {
        rows.extend(allocation_traces(cfg, &checkpoints)?);
    }
    let dir = out_dir(&configs[0])?;
    let path = dir.join("allocation.csv");
    write_allocation_csv(&path, &rows)?;
    for cfg in &configs {
        let label = cfg.p_or_kind();
        let last = *checkpoints.iter().max().expect("non-empty");
        let kl: Vec<f64> = rows
            .iter()
            .filter(|r| r.p == label && r.t == last)
            .map(|r| r.kl)
            .collect();
        println!(
            "p={label}: mean KL at t={last} {:.5}",
            kl.iter().sum::<f64>() / kl.len() as f64
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_gen_calibration(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    // Same stream and call order as the speller scenario, so the exported
    // model is the one a run with this config would use.
    let mut rng = RngStream::new(cfg.master_seed, StreamId::new(0, 0, Purpose::Calibration));
    let sim = EegSimulator::new(cfg.eeg())?;
    let data = sim.generate_calibration(cfg.calib_targets, cfg.calib_nontargets, &mut rng)?;
    let model = train_swlda(&data, &cfg.swlda(), &mut rng)?;
    let dir = out_dir(&cfg)?;
    write_calibration(dir.join("calibration.csv"), &data)?;
    write_model(dir.join("model.csv"), &model)?;
    let s = &model.calib_stats;
    println!(
        "{} epochs, {} features selected, held-out standardized gap {:.4} (target mean {:.4}, non-target mean {:.4}, pooled var {:.4})",
        data.len(),
        model.selected.len(),
        s.standardized_gap(),
        s.target_mean,
        s.nontarget_mean,
        s.pooled_var()
    );
    println!(
        "wrote {} and {}",
        dir.join("calibration.csv").display(),
        dir.join("model.csv").display()
    );
    Ok(())
}

fn cmd_validate_table(args: &ValidateArgs) -> Result<()> {
    let table = load_word_table_with_cap(&args.path, args.cap)?;
    let h = table.row_entropies();
    let (lo, hi) = h
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    println!(
        "ok: {} words, row entropy mean {:.4} (min {:.4}, max {:.4}) nats",
        table.vocab().len(),
        h.iter().sum::<f64>() / h.len() as f64,
        lo,
        hi
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Bound(a) => cmd_bound(&a),
        Command::Allocation(a) => cmd_allocation(&a),
        Command::GenCalibration(a) => cmd_gen_calibration(&a),
        Command::ValidateTable(a) => cmd_validate_table(&a),
    }
}
