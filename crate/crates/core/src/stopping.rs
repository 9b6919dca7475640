//! Stopping and decision rules.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::algorithms::BbtsState;
use crate::env::argmax;
use crate::error::{Error, Result};
use crate::posterior::MixturePosterior;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    #[default]
    FixedConfidence,
    FixedBudget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaVariant {
    /// Standardized posterior-mean gaps against `sqrt(2 ln(ln(t) M / delta))`.
    #[default]
    MomentMatched,
    /// Chernoff GLR statistic against `4 ln(4 + ln t) + C ln((J-1)/delta_M)`.
    Asymptotic,
}

/// How `ln(t) M / delta` is grouped inside the moment-matched threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaGrouping {
    /// `sqrt(2 ln(ln(t) * M / delta))`
    #[default]
    Literal,
    /// `sqrt(2 ln(ln(t * M / delta)))`
    Nested,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoppingConfig {
    pub mode: StopMode,
    pub delta: f64,
    pub n_tasks: usize,
    pub t_max: u64,
    pub gamma_variant: GammaVariant,
    pub c: f64,
    pub min_t: u64,
    pub grouping: GammaGrouping,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        Self {
            mode: StopMode::FixedConfidence,
            delta: 0.1,
            n_tasks: 20,
            t_max: 100,
            gamma_variant: GammaVariant::MomentMatched,
            c: 1.0,
            min_t: 3,
            grouping: GammaGrouping::Literal,
        }
    }
}

impl StoppingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta", format!("{} not in (0, 1)", self.delta)));
        }
        if self.n_tasks == 0 {
            return Err(Error::invalid("num_tasks", "must be at least 1"));
        }
        if self.mode == StopMode::FixedBudget && self.t_max == 0 {
            return Err(Error::invalid("t_max", "must be at least 1 in budget mode"));
        }
        if self.gamma_variant == GammaVariant::MomentMatched && self.min_t < 3 {
            return Err(Error::invalid(
                "min_t",
                "must be at least 3 for the moment-matched rule",
            ));
        }
        if !self.c.is_finite() || self.c < 0.0 {
            return Err(Error::invalid("c", "must be finite and non-negative"));
        }
        Ok(())
    }

    /// Per-task confidence `delta / M`.
    pub fn delta_task(&self) -> f64 {
        bonferroni(self.delta, self.n_tasks)
    }

    pub fn gamma(&self, t: u64) -> f64 {
        moment_matched_gamma(t, self.n_tasks, self.delta, self.grouping)
    }
}

pub fn bonferroni(delta: f64, n_tasks: usize) -> f64 {
    delta / n_tasks as f64
}

#[derive(Clone, Copy, Debug)]
pub struct GlrInputs<'a> {
    pub pulls: &'a [u64],
    pub means: &'a [f64],
    pub noise_var: f64,
}

fn gaussian_kl(m1: f64, m2: f64, noise_var: f64) -> f64 {
    (m1 - m2).powi(2) / (2.0 * noise_var)
}

/// Pairwise statistic `Z(i, j)`; zero when arm `j` looks at least as good as `i`.
pub fn glr_pair(inputs: &GlrInputs<'_>, i: usize, j: usize) -> f64 {
    let (mi, mj) = (inputs.means[i], inputs.means[j]);
    if mj >= mi {
        return 0.0;
    }
    let (ni, nj) = (inputs.pulls[i] as f64, inputs.pulls[j] as f64);
    let pooled = (ni * mi + nj * mj) / (ni + nj);
    ni * gaussian_kl(mi, pooled, inputs.noise_var) + nj * gaussian_kl(mj, pooled, inputs.noise_var)
}

/// `max_i min_{j != i} Z(i, j)`; zero until every arm has been pulled.
pub fn chernoff_glr(inputs: &GlrInputs<'_>) -> f64 {
    let n = inputs.means.len();
    if n < 2 || inputs.pulls.iter().any(|&p| p == 0) {
        return 0.0;
    }
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| glr_pair(inputs, i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Moment-matched threshold. Returns `+inf` where the logarithms are undefined
/// or non-positive, so the rule never fires there.
pub fn moment_matched_gamma(t: u64, n_tasks: usize, delta: f64, grouping: GammaGrouping) -> f64 {
    let t = t as f64;
    let m = n_tasks as f64;
    let inner = match grouping {
        GammaGrouping::Literal => t.ln() * m / delta,
        GammaGrouping::Nested => (t * m / delta).ln(),
    };
    if !(inner > 1.0) {
        return f64::INFINITY;
    }
    (2.0 * inner.ln()).sqrt()
}

/// Standardized gap between the current best arm and `j`.
fn standardized_gap(mean_best: f64, var_best: f64, mean_j: f64, var_j: f64) -> f64 {
    let diff = mean_best - mean_j;
    let sd = (var_best + var_j).sqrt();
    if sd > 0.0 {
        diff / sd
    } else if diff > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Smallest standardized gap between the best posterior mean and any other arm.
pub fn moment_matched_statistic(means: &[f64], vars: &[f64]) -> f64 {
    let best = argmax(means);
    (0..means.len())
        .filter(|&j| j != best)
        .map(|j| standardized_gap(means[best], vars[best], means[j], vars[j]))
        .fold(f64::INFINITY, f64::min)
}

pub fn gaussian_mixture_stop(means: &[f64], vars: &[f64], t: u64, cfg: &StoppingConfig) -> bool {
    if t < cfg.min_t || means.len() < 2 {
        return false;
    }
    moment_matched_statistic(means, vars) >= cfg.gamma(t)
}

pub fn asymptotic_threshold(t: u64, n_arms: usize, delta: f64, c: f64) -> f64 {
    let t = (t.max(1)) as f64;
    let log_term = if c == 0.0 {
        0.0
    } else {
        ((n_arms as f64 - 1.0) / delta).ln()
    };
    4.0 * (4.0 + t.ln()).ln() + 2.0 * c * (log_term / 2.0)
}

/// GLR stop using the asymptotic threshold at the Bonferroni-corrected level.
pub fn glr_stop(inputs: &GlrInputs<'_>, t: u64, cfg: &StoppingConfig) -> bool {
    if t < cfg.min_t {
        return false;
    }
    let threshold = asymptotic_threshold(t, inputs.means.len(), cfg.delta_task(), cfg.c);
    chernoff_glr(inputs) >= threshold
}

/// Bayes decision: arm with the highest posterior mean, lowest index on ties.
pub fn decide(post: &MixturePosterior) -> usize {
    argmax(&post.posterior_means())
}

pub fn budget_stop(t: u64, cfg: &StoppingConfig) -> bool {
    t >= cfg.t_max
}

pub const BBTS_MC_DRAWS: usize = 10_000;

/// If a single challenger beats the leader with at least this probability,
/// all `BBTS_MC_DRAWS` draws succeed with probability below `2e-9`, so the
/// Monte Carlo check is skipped.
const BBTS_PRESCREEN: f64 = 2e-3;

/// Exact `P(Y > X)` for `X ~ Beta(a1, b1)`, `Y ~ Beta(a2, b2)` with integer `a2`.
pub fn beta_exceed_prob(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    let base = ln_beta(a1, b1);
    let n = a2.round() as u64;
    let mut total = 0.0;
    for i in 0..n {
        let i = i as f64;
        total += (ln_beta(a1 + i, b1 + b2) - (b2 + i).ln() - ln_beta(1.0 + i, b2) - base).exp();
    }
    total.clamp(0.0, 1.0)
}

/// Monte Carlo estimate of the probability that the arm with the highest
/// posterior mean also has the highest sampled success rate.
pub fn bbts_dominance<R: Rng + ?Sized>(state: &BbtsState, draws: usize, rng: &mut R) -> f64 {
    let best = state.best();
    let dists = beta_dists(state);
    let order = challenger_order(state, best);
    let mut wins = 0usize;
    for _ in 0..draws {
        if dominates(&dists, best, &order, rng) {
            wins += 1;
        }
    }
    wins as f64 / draws as f64
}

/// True iff the Monte Carlo dominance probability reaches `p_max`. Stops
/// drawing as soon as too many losses make the threshold unreachable.
pub fn bbts_stop<R: Rng + ?Sized>(state: &BbtsState, rng: &mut R) -> bool {
    if state.n_arms() < 2 {
        return true;
    }
    let best = state.best();
    let order = challenger_order(state, best);
    let (ab, bb) = (state.alpha[best], state.beta_counts[best]);
    if order
        .iter()
        .any(|&j| beta_exceed_prob(ab, bb, state.alpha[j], state.beta_counts[j]) > BBTS_PRESCREEN)
    {
        return false;
    }
    let dists = beta_dists(state);
    let allowed = ((1.0 - state.p_max) * BBTS_MC_DRAWS as f64).floor() as usize;
    let mut losses = 0usize;
    for _ in 0..BBTS_MC_DRAWS {
        if !dominates(&dists, best, &order, rng) {
            losses += 1;
            if losses > allowed {
                return false;
            }
        }
    }
    true
}

fn beta_dists(state: &BbtsState) -> Vec<Beta<f64>> {
    (0..state.n_arms())
        .map(|a| Beta::new(state.alpha[a], state.beta_counts[a]).expect("Beta parameters stay positive"))
        .collect()
}

/// Challengers sorted by decreasing posterior mean, so losing draws are found early.
fn challenger_order(state: &BbtsState, best: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..state.n_arms()).filter(|&a| a != best).collect();
    order.sort_by(|&a, &b| {
        state
            .posterior_mean(b)
            .total_cmp(&state.posterior_mean(a))
            .then(a.cmp(&b))
    });
    order
}

fn dominates<R: Rng + ?Sized>(dists: &[Beta<f64>], best: usize, order: &[usize], rng: &mut R) -> bool {
    let x = dists[best].sample(rng);
    order.iter().all(|&j| dists[j].sample(rng) < x)
}
