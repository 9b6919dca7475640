//! Sequential task loops.

use rand::Rng;
use rayon::prelude::*;

use super::config::{Algorithm, ExperimentConfig, Feedback, P300Reward, Scenario};
use crate::algorithms::{bbts_step, bbts_update, random_select, top_two_select, vtts_prior, BatchRacing, BbtsState};
use crate::env::{sample_categorical, sample_gaussian_u_sequence, sample_task_sequence, Environment};
use crate::error::{Error, Result};
use crate::p300::{P300Channel, SwldaModel};
use crate::posterior::MixturePosterior;
use crate::priors::{
    build_mixture_prior, load_word_table, GaussianUPrior, MarkovPrior, MixturePriorParams, PriorProvider,
    WordModelTable,
};
use crate::rng::{Purpose, RngStream, StreamId};
use crate::stopping::{
    bbts_stop, budget_stop, decide, gaussian_mixture_stop, glr_stop, GammaVariant, GlrInputs, StopMode,
};

/// Outcome of one task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskResult {
    /// Zero-based task index.
    pub task: usize,
    /// Rounds (pulls) used.
    pub tau: u64,
    pub decided: usize,
    pub truth: usize,
    pub correct: bool,
    /// The task hit the safety cap before the stopping rule fired.
    pub capped: bool,
    pub pulls: Option<Vec<usize>>,
}

/// Outcome of one replication (one full task sequence).
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub replication: u64,
    pub tasks: Vec<TaskResult>,
}

impl RunResult {
    pub fn total_steps(&self) -> u64 {
        self.tasks.iter().map(|t| t.tau).sum()
    }

    pub fn n_correct(&self) -> usize {
        self.tasks.iter().filter(|t| t.correct).count()
    }

    pub fn all_correct(&self) -> bool {
        self.tasks.iter().all(|t| t.correct)
    }
}

/// Word-table prior whose rows are re-indexed into another table's vocabulary.
#[derive(Clone, Debug)]
struct RemappedTable {
    initial: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl RemappedTable {
    fn new(source: &WordModelTable, target: &WordModelTable) -> Result<Self> {
        let j = target.vocab().len();
        let map: Vec<usize> = source
            .vocab()
            .iter()
            .map(|w| {
                target
                    .word_index(w)
                    .ok_or_else(|| Error::WordTable(format!("truth word `{w}` is not in the prior vocabulary")))
            })
            .collect::<Result<_>>()?;
        let remap = |row: &[f64]| {
            let mut out = vec![0.0; j];
            for (i, p) in row.iter().enumerate() {
                out[map[i]] += p;
            }
            out
        };
        let mut rows = vec![vec![0.0; j]; j];
        for (i, &t) in map.iter().enumerate() {
            rows[t] = remap(source.row(i)?);
        }
        // Prior words the truth table never mentions fall back to its initial distribution.
        let initial = remap(source.initial());
        for (t, row) in rows.iter_mut().enumerate() {
            if !map.contains(&t) {
                row.clone_from(&initial);
            }
        }
        Ok(Self { initial, rows })
    }
}

impl PriorProvider for RemappedTable {
    fn num_arms(&self) -> usize {
        self.rows.len()
    }

    fn initial_dist(&self) -> Vec<f64> {
        self.initial.clone()
    }

    fn next_dist(&self, prev: usize) -> Result<Vec<f64>> {
        Ok(self.rows[prev].clone())
    }
}

enum Context {
    Markov(MarkovPrior),
    GaussianU(GaussianUPrior),
    P300 {
        table: WordModelTable,
        truth: RemappedTable,
        channel: P300Channel,
        /// Calibrated standardized score gap.
        gap: f64,
    },
}

/// Everything shared by the replications of one configuration: loaded
/// tables and, for the speller, the trained classifier.
pub struct Experiment {
    cfg: ExperimentConfig,
    ctx: Context,
}

enum Rewards {
    Gaussian(Vec<Environment>),
    Eeg(Vec<usize>, P300Channel),
}

impl Rewards {
    fn truth(&self, m: usize) -> usize {
        match self {
            Rewards::Gaussian(envs) => envs[m].optimal_arm(),
            Rewards::Eeg(targets, ..) => targets[m],
        }
    }

    fn pull<R: Rng + ?Sized>(&mut self, m: usize, arm: usize, rng: &mut R) -> Result<f64> {
        match self {
            Rewards::Gaussian(envs) => envs[m].pull(arm, rng),
            Rewards::Eeg(targets, channel) => {
                let score = channel.reward(targets[m], arm, rng)?;
                Ok(channel.model().calib_stats.standardize(score))
            }
        }
    }
}

impl Experiment {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let ctx = match cfg.scenario {
            Scenario::SyntheticMarkov => Context::Markov(MarkovPrior::new(cfg.prior_strength(), cfg.num_arms)?),
            Scenario::GaussianU => {
                Context::GaussianU(GaussianUPrior::new(cfg.u_kind, cfg.num_arms, cfg.mu0, cfg.sigma0)?)
            }
            Scenario::P300 => {
                let path = cfg.word_table.as_ref().expect("validated");
                let table = load_word_table(path)?;
                let truth_table = match &cfg.truth_table {
                    Some(p) => load_word_table(p)?,
                    None => table.clone(),
                };
                let truth = RemappedTable::new(&truth_table, &table)?;
                let mut rng = RngStream::new(cfg.master_seed, StreamId::new(0, 0, Purpose::Calibration));
                let channel = P300Channel::calibrate(
                    cfg.eeg(),
                    cfg.calib_targets,
                    cfg.calib_nontargets,
                    &cfg.swlda(),
                    &mut rng,
                )?;
                let gap = channel.model().calib_stats.standardized_gap();
                if !(gap > 0.0) {
                    return Err(Error::Training(format!(
                        "classifier does not separate targets (standardized gap {gap})"
                    )));
                }
                Context::P300 {
                    table,
                    truth,
                    channel,
                    gap,
                }
            }
        };
        Ok(Self { cfg: cfg.clone(), ctx })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn num_arms(&self) -> usize {
        match &self.ctx {
            Context::P300 { table, .. } => table.vocab().len(),
            _ => self.cfg.num_arms,
        }
    }

    /// Calibrated standardized score gap of the speller classifier.
    pub fn p300_gap(&self) -> Option<f64> {
        match &self.ctx {
            Context::P300 { gap, .. } => Some(*gap),
            _ => None,
        }
    }

    pub fn p300_model(&self) -> Option<&SwldaModel> {
        match &self.ctx {
            Context::P300 { channel, .. } => Some(channel.model()),
            _ => None,
        }
    }

    fn noise_var(&self) -> f64 {
        match self.ctx {
            Context::P300 { .. } => 1.0,
            _ => self.cfg.noise_sd * self.cfg.noise_sd,
        }
    }

    fn mixture_params(&self) -> MixturePriorParams {
        match &self.ctx {
            Context::P300 { gap, .. } => MixturePriorParams {
                mu: 0.0,
                gap: *gap,
                ..self.cfg.mixture_params()
            },
            _ => self.cfg.mixture_params(),
        }
    }

    fn bbts_threshold(&self) -> f64 {
        if let Some(t) = self.cfg.threshold {
            return t;
        }
        match &self.ctx {
            Context::Markov(_) => self.cfg.mu + self.cfg.gap / 2.0,
            Context::GaussianU(p) => p.mu0 / 2.0,
            Context::P300 { gap, .. } => gap / 2.0,
        }
    }

    fn rewards(&self, replication: u64) -> Result<Rewards> {
        let mut rng = RngStream::new(
            self.cfg.master_seed,
            StreamId::new(replication, 0, Purpose::TaskGeneration),
        );
        let m = self.cfg.num_tasks;
        match &self.ctx {
            Context::Markov(prior) => {
                let seq = sample_task_sequence(prior, m, &self.cfg.mixture_params(), self.cfg.noise_sd, &mut rng)?;
                Ok(Rewards::Gaussian(seq.tasks().to_vec()))
            }
            Context::GaussianU(prior) => {
                let seq = sample_gaussian_u_sequence(prior, m, self.cfg.noise_sd, &mut rng)?;
                Ok(Rewards::Gaussian(seq.tasks().to_vec()))
            }
            Context::P300 {
                truth, channel, gap, ..
            } => {
                let mut targets = Vec::with_capacity(m);
                let mut prev = None;
                for _ in 0..m {
                    let a = sample_categorical(&truth.dist_given(prev)?, &mut rng);
                    targets.push(a);
                    prev = Some(a);
                }
                match self.cfg.p300_reward {
                    P300Reward::Eeg => Ok(Rewards::Eeg(targets, channel.clone())),
                    P300Reward::Gaussian => {
                        let j = self.num_arms();
                        let envs = targets
                            .iter()
                            .map(|&a| {
                                let mut theta = vec![0.0; j];
                                theta[a] = *gap;
                                Environment::new(theta, 1.0)
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok(Rewards::Gaussian(envs))
                    }
                }
            }
        }
    }

    /// Prior for a task. `prev` is the history entry for the previous task;
    /// `informative = false` gives the non-informative baseline prior.
    fn task_prior(&self, prev: Option<usize>, informative: bool) -> Result<MixturePosterior> {
        let nv = self.noise_var();
        let j = self.num_arms();
        match &self.ctx {
            Context::GaussianU(prior) => {
                if !informative {
                    return MixturePosterior::gaussian(vec![0.0; j], vec![self.cfg.vtts_prior_var; j], nv);
                }
                match prev {
                    None => prior.first_task_posterior(nv),
                    Some(p) => prior.task_posterior(p, nv),
                }
            }
            Context::Markov(prior) => {
                if !informative {
                    return vtts_prior(j, &self.mixture_params(), nv);
                }
                build_mixture_prior(&prior.dist_given(prev)?, &self.mixture_params(), nv)
            }
            Context::P300 { table, .. } => {
                if !informative {
                    return vtts_prior(j, &self.mixture_params(), nv);
                }
                build_mixture_prior(&table.dist_given(prev)?, &self.mixture_params(), nv)
            }
        }
    }

    /// Runs the full task sequence of one replication.
    pub fn run_replication(&self, replication: u64) -> Result<RunResult> {
        let mut rewards = self.rewards(replication)?;
        let mut tasks = Vec::with_capacity(self.cfg.num_tasks);
        let mut history: Option<usize> = None;
        for m in 0..self.cfg.num_tasks {
            let truth = rewards.truth(m);
            let mut res = self.run_task(replication, m, history, &mut rewards)?;
            res.truth = truth;
            res.correct = res.decided == truth;
            history = Some(match (self.cfg.algorithm, self.cfg.feedback) {
                (Algorithm::SttsOracle, _) | (_, Feedback::OracleReveal) | (_, Feedback::Backspace) => truth,
                _ => res.decided,
            });
            tasks.push(res);
        }
        Ok(RunResult { replication, tasks })
    }

    fn run_task(&self, rep: u64, m: usize, prev: Option<usize>, rewards: &mut Rewards) -> Result<TaskResult> {
        let seed = self.cfg.master_seed;
        let task = m as u64;
        let mut reward_rng = RngStream::new(seed, StreamId::new(rep, task, Purpose::Reward));
        let mut select_rng = RngStream::new(seed, StreamId::new(rep, task, Purpose::Selection));
        let mut stop_rng = RngStream::new(seed, StreamId::new(rep, task, Purpose::Stopping));
        let mut log = self.cfg.record_pulls.then(Vec::new);
        let stop_cfg = self.cfg.stopping();
        let budget = stop_cfg.mode == StopMode::FixedBudget;
        let cap = self.cfg.safety_cap;
        let j = self.num_arms();
        let mut t: u64 = 0;
        let mut capped = false;

        let mut pull = |arm: usize, t: &mut u64, log: &mut Option<Vec<usize>>| -> Result<f64> {
            *t += 1;
            if let Some(l) = log.as_mut() {
                l.push(arm);
            }
            rewards.pull(m, arm, &mut reward_rng)
        };

        let decided = match self.cfg.algorithm {
            Algorithm::Stts | Algorithm::SttsOracle | Algorithm::Vtts | Algorithm::Random => {
                let informative = matches!(self.cfg.algorithm, Algorithm::Stts | Algorithm::SttsOracle);
                let mut post = self.task_prior(prev, informative)?;
                let tt = self.cfg.top_two()?;
                let mut means = vec![0.0; j];
                let mut vars = vec![0.0; j];
                loop {
                    if budget {
                        if budget_stop(t, &stop_cfg) {
                            break;
                        }
                    } else {
                        if t >= cap {
                            capped = true;
                            break;
                        }
                        let stop = match stop_cfg.gamma_variant {
                            GammaVariant::MomentMatched => {
                                t >= stop_cfg.min_t && {
                                    post.all_moments_into(&mut means, &mut vars);
                                    gaussian_mixture_stop(&means, &vars, t, &stop_cfg)
                                }
                            }
                            GammaVariant::Asymptotic => {
                                post.all_moments_into(&mut means, &mut vars);
                                let inputs = GlrInputs {
                                    pulls: post.stats().pulls(),
                                    means: &means,
                                    noise_var: post.noise_var(),
                                };
                                glr_stop(&inputs, t, &stop_cfg)
                            }
                        };
                        if stop {
                            break;
                        }
                    }
                    let arm = if self.cfg.algorithm == Algorithm::Random {
                        random_select(j, &mut select_rng)
                    } else {
                        top_two_select(&post, &tt, &mut select_rng)
                    };
                    let r = pull(arm, &mut t, &mut log)?;
                    post.update(arm, r)?;
                }
                decide(&post)
            }
            Algorithm::Br => {
                let mut br = BatchRacing::new(j, self.noise_var(), stop_cfg.delta_task(), self.cfg.shrink)?;
                'rounds: while !br.is_done() {
                    let batch = br.surviving().to_vec();
                    for arm in batch {
                        if budget && budget_stop(t, &stop_cfg) {
                            break 'rounds;
                        }
                        if !budget && t >= cap {
                            capped = true;
                            break 'rounds;
                        }
                        let r = pull(arm, &mut t, &mut log)?;
                        br.record(arm, r)?;
                    }
                    br.end_round();
                }
                // A fixed budget keeps pulling the last survivor.
                if budget {
                    while !budget_stop(t, &stop_cfg) {
                        let arm = br.best();
                        let r = pull(arm, &mut t, &mut log)?;
                        br.record(arm, r)?;
                    }
                }
                br.best()
            }
            Algorithm::Bbts => {
                let mut state = BbtsState::new(j, self.bbts_threshold(), self.cfg.bbts_p_max())?;
                loop {
                    if budget {
                        if budget_stop(t, &stop_cfg) {
                            break;
                        }
                    } else {
                        if t >= cap {
                            capped = true;
                            break;
                        }
                        if bbts_stop(&state, &mut stop_rng) {
                            break;
                        }
                    }
                    let arm = bbts_step(&state, &mut select_rng);
                    let r = pull(arm, &mut t, &mut log)?;
                    bbts_update(&mut state, arm, r)?;
                }
                state.best()
            }
        };

        Ok(TaskResult {
            task: m,
            tau: t,
            decided,
            truth: usize::MAX,
            correct: false,
            capped,
            pulls: log,
        })
    }

    pub fn run_all(&self, parallel: bool) -> Result<Vec<RunResult>> {
        let reps = 0..self.cfg.replications as u64;
        if parallel {
            reps.into_par_iter().map(|r| self.run_replication(r)).collect()
        } else {
            reps.map(|r| self.run_replication(r)).collect()
        }
    }
}

/// Runs one replication of `cfg` from scratch.
pub fn run_task_sequence(cfg: &ExperimentConfig, replication: u64) -> Result<RunResult> {
    Experiment::prepare(cfg)?.run_replication(replication)
}
