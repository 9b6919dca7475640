//! Experiment configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::algorithms::{bbts_p_max, BatchRacing, TopTwoConfig};
use crate::error::{Error, Result};
use crate::p300::{EegConfig, SwldaParams};
use crate::priors::{MixturePriorParams, UKind};
use crate::stopping::{GammaGrouping, GammaVariant, StopMode, StoppingConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Markov prior over optimal arms with the `(mu, mu + gap)` mean model.
    #[default]
    SyntheticMarkov,
    /// Gaussian prior whose mean follows a transition matrix row.
    GaussianU,
    /// Word-selection speller with simulated EEG classifier scores.
    P300,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::SyntheticMarkov => "synthetic_markov",
            Scenario::GaussianU => "gaussian_u",
            Scenario::P300 => "p300",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Top-two sampling with the prior built from the previous decision.
    #[default]
    Stts,
    /// Top-two sampling with the prior built from the previous true answer.
    #[serde(rename = "stts-oracle")]
    SttsOracle,
    /// Top-two sampling with a non-informative prior.
    Vtts,
    /// Uniformly random pulls, stopped and decided like `vtts`.
    Random,
    /// Batch racing with confidence-bound elimination.
    Br,
    /// Beta-Bernoulli Thompson sampling on thresholded rewards.
    Bbts,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Stts,
        Algorithm::SttsOracle,
        Algorithm::Vtts,
        Algorithm::Random,
        Algorithm::Br,
        Algorithm::Bbts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Stts => "stts",
            Algorithm::SttsOracle => "stts-oracle",
            Algorithm::Vtts => "vtts",
            Algorithm::Random => "random",
            Algorithm::Br => "br",
            Algorithm::Bbts => "bbts",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}")))
    }
}

/// What enters the history that later priors condition on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// The agent's own decisions.
    #[default]
    None,
    /// The true optimal arm after every task.
    OracleReveal,
    /// Decisions, except that a wrong decision is corrected to the truth.
    Backspace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum P300Reward {
    /// Classifier scores of simulated epochs.
    #[default]
    Eeg,
    /// Gaussian rewards with the calibrated gap and unit variance.
    Gaussian,
}

/// All experiment settings. Every field has a default, so a config file only
/// lists what it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub algorithm: Algorithm,
    pub num_arms: usize,
    pub num_tasks: usize,
    pub replications: usize,
    pub master_seed: u64,

    /// Markov prior strength; absent means `1 / num_arms`.
    pub p: Option<f64>,
    pub mu: f64,
    pub gap: f64,
    /// Prior standard deviation of each mean.
    pub sigma0: f64,
    pub sigma1: f64,
    pub perturb: bool,
    pub noise_sd: f64,

    pub u_kind: UKind,
    pub mu0: f64,
    /// Prior variance of the non-informative Gaussian prior.
    pub vtts_prior_var: f64,

    pub beta: f64,
    pub max_resample: usize,
    pub shrink: f64,
    /// Success cutoff for `bbts`; absent means halfway up the gap.
    pub threshold: Option<f64>,
    /// Stopping probability for `bbts`; absent means `1 - delta / (1000 M)`.
    pub p_max: Option<f64>,

    pub mode: StopMode,
    pub delta: f64,
    pub t_max: u64,
    pub gamma_variant: GammaVariant,
    pub c: f64,
    pub min_t: u64,
    pub gamma_grouping: GammaGrouping,
    pub feedback: Feedback,
    /// Rounds after which a fixed-confidence task is cut off and flagged.
    pub safety_cap: u64,

    pub word_table: Option<PathBuf>,
    /// Table the true word sequence is drawn from; defaults to `word_table`.
    pub truth_table: Option<PathBuf>,
    pub sigma_eeg: f64,
    pub n_electrodes: usize,
    pub window_len: usize,
    pub kernel_bandwidth: f64,
    pub ar_coef: f64,
    pub amplitude_ratio: f64,
    pub nontarget_amp: f64,
    pub calib_targets: usize,
    pub calib_nontargets: usize,
    pub p_enter: f64,
    pub p_remove: f64,
    pub max_features: usize,
    pub p300_reward: P300Reward,

    pub output: Option<PathBuf>,
    /// Keep every pulled arm in the run results.
    pub record_pulls: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let prior = MixturePriorParams::default();
        let eeg = EegConfig::default();
        let swlda = SwldaParams::default();
        let stop = StoppingConfig::default();
        let tt = TopTwoConfig::default();
        Self {
            scenario: Scenario::SyntheticMarkov,
            algorithm: Algorithm::Stts,
            num_arms: 10,
            num_tasks: 20,
            replications: 200,
            master_seed: 0,
            p: None,
            mu: prior.mu,
            gap: prior.gap,
            sigma0: prior.sigma0,
            sigma1: prior.sigma1,
            perturb: prior.perturb,
            noise_sd: 1.0,
            u_kind: UKind::Successor,
            mu0: 5.0,
            vtts_prior_var: 100.0,
            beta: tt.beta,
            max_resample: tt.max_resample,
            shrink: BatchRacing::DEFAULT_SHRINK,
            threshold: None,
            p_max: None,
            mode: stop.mode,
            delta: stop.delta,
            t_max: stop.t_max,
            gamma_variant: stop.gamma_variant,
            c: stop.c,
            min_t: stop.min_t,
            gamma_grouping: stop.grouping,
            feedback: Feedback::None,
            safety_cap: 1_000_000,
            word_table: None,
            truth_table: None,
            sigma_eeg: eeg.noise_var,
            n_electrodes: eeg.n_electrodes,
            window_len: eeg.window_len,
            kernel_bandwidth: eeg.kernel_bandwidth,
            ar_coef: eeg.ar_coef,
            amplitude_ratio: eeg.amplitude_ratio,
            nontarget_amp: P300_NONTARGET_AMP,
            calib_targets: 300,
            calib_nontargets: 1500,
            p_enter: swlda.p_enter,
            p_remove: swlda.p_remove,
            max_features: swlda.max_features,
            p300_reward: P300Reward::Eeg,
            output: None,
            record_pulls: false,
        }
    }
}

/// Non-target level used by the speller scenario. With unit noise it puts the
/// classifier's held-out standardized score gap near 4.4 (about 2.7 at noise
/// variance 2.5).
pub const P300_NONTARGET_AMP: f64 = 0.4;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 {
            return Err(Error::invalid("num_tasks", "must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        if self.scenario != Scenario::P300 && self.num_arms < 2 {
            return Err(Error::invalid("num_arms", "need at least two arms"));
        }
        if let Some(p) = self.p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("p", format!("{p} not in [0, 1]")));
            }
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd", "must be positive"));
        }
        if !(self.vtts_prior_var > 0.0) {
            return Err(Error::invalid("vtts_prior_var", "must be positive"));
        }
        if self.safety_cap == 0 {
            return Err(Error::invalid("safety_cap", "must be at least 1"));
        }
        if self.scenario == Scenario::P300 && self.word_table.is_none() {
            return Err(Error::invalid("word_table", "the p300 scenario needs a word table"));
        }
        if self.scenario != Scenario::P300 && self.p300_reward == P300Reward::Gaussian {
            return Err(Error::invalid("p300_reward", "only meaningful for the p300 scenario"));
        }
        self.mixture_params().validate()?;
        self.top_two()?;
        self.stopping().validate()?;
        if self.scenario == Scenario::P300 {
            self.eeg().validate()?;
        }
        Ok(())
    }

    /// Markov prior strength, defaulting to the non-informative `1 / J`.
    pub fn prior_strength(&self) -> f64 {
        self.p.unwrap_or(1.0 / self.num_arms as f64)
    }

    pub fn mixture_params(&self) -> MixturePriorParams {
        MixturePriorParams {
            mu: self.mu,
            gap: self.gap,
            sigma0: self.sigma0,
            sigma1: self.sigma1,
            perturb: self.perturb,
        }
    }

    pub fn top_two(&self) -> Result<TopTwoConfig> {
        TopTwoConfig::new(self.beta, self.max_resample)
    }

    pub fn stopping(&self) -> StoppingConfig {
        StoppingConfig {
            mode: self.mode,
            delta: self.delta,
            n_tasks: self.num_tasks,
            t_max: self.t_max,
            gamma_variant: self.gamma_variant,
            c: self.c,
            min_t: self.min_t,
            grouping: self.gamma_grouping,
        }
    }

    pub fn bbts_p_max(&self) -> f64 {
        self.p_max.unwrap_or_else(|| bbts_p_max(self.delta, self.num_tasks))
    }

    pub fn eeg(&self) -> EegConfig {
        EegConfig {
            n_electrodes: self.n_electrodes,
            window_len: self.window_len,
            noise_var: self.sigma_eeg,
            kernel_bandwidth: self.kernel_bandwidth,
            ar_coef: self.ar_coef,
            amplitude_ratio: self.amplitude_ratio,
            nontarget_amp: self.nontarget_amp,
        }
    }

    pub fn swlda(&self) -> SwldaParams {
        SwldaParams {
            p_enter: self.p_enter,
            p_remove: self.p_remove,
            max_features: self.max_features,
        }
    }

    /// Prior-strength label for output rows: `p` for the Markov scenario,
    /// the matrix kind for `gaussian_u`, the table name for `p300`.
    pub fn p_or_kind(&self) -> String {
        match self.scenario {
            Scenario::SyntheticMarkov => self.prior_strength().to_string(),
            Scenario::GaussianU => format!("U{}", u8::from(self.u_kind)),
            Scenario::P300 => self
                .word_table
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let c = ExperimentConfig::default();
        assert_eq!(c.prior_strength(), 0.1);
        assert_eq!(c.stopping().delta_task(), 0.005);
    }

    #[test]
    fn serde_roundtrip_and_unknown_keys() {
        let c = ExperimentConfig {
            p: Some(0.7),
            algorithm: Algorithm::Br,
            ..Default::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"num_arms": 5, "mode": "fixed_budget"}"#).unwrap();
        assert_eq!(partial.num_arms, 5);
        assert_eq!(partial.mode, StopMode::FixedBudget);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = ExperimentConfig {
            p: Some(1.5),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            scenario: Scenario::P300,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            delta: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(Algorithm::parse(a.name()).unwrap(), a);
        }
        assert!(Algorithm::parse("nope").is_err());
    }
}
