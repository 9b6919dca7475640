//! P300 speller reward simulation.
//!
//! Flashing a candidate word is an arm pull. The simulator produces an EEG
//! epoch (a target response if the flashed word is the one the user wants,
//! a non-target response otherwise), and a stepwise LDA classifier trained on
//! offline calibration data turns the epoch into a score that serves as the
//! reward.

mod eeg;
mod io;
mod swlda;

pub use eeg::{electrode_positions, spatial_kernel, EegConfig, EegEpoch, EegSimulator, Label};
pub use io::{read_calibration, read_model, write_calibration, write_model};
pub use swlda::{
    auc, score, stepwise_regression, train_swlda, CalibStats, StepwiseFit, SwldaModel, SwldaParams, HOLDOUT_FRACTION,
};

use rand::Rng;

use crate::error::Result;

/// Simulator plus trained classifier: the score-valued reward source.
#[derive(Clone, Debug)]
pub struct P300Channel {
    sim: EegSimulator,
    model: SwldaModel,
    buf: Vec<f64>,
}

impl P300Channel {
    pub fn new(sim: EegSimulator, model: SwldaModel) -> Self {
        let buf = vec![0.0; sim.config().n_features()];
        Self { sim, model, buf }
    }

    /// Generates calibration data with `rng`, trains a classifier on it and
    /// wraps both.
    pub fn calibrate<R: Rng + ?Sized>(
        cfg: EegConfig,
        n_target: usize,
        n_nontarget: usize,
        params: &SwldaParams,
        rng: &mut R,
    ) -> Result<Self> {
        let sim = EegSimulator::new(cfg)?;
        let data = sim.generate_calibration(n_target, n_nontarget, rng)?;
        let model = train_swlda(&data, params, rng)?;
        Ok(Self::new(sim, model))
    }

    pub fn simulator(&self) -> &EegSimulator {
        &self.sim
    }

    pub fn model(&self) -> &SwldaModel {
        &self.model
    }

    /// Raw classifier score for flashing `pulled` while the user attends to `target`.
    pub fn reward<R: Rng + ?Sized>(&mut self, target: usize, pulled: usize, rng: &mut R) -> Result<f64> {
        let label = if pulled == target {
            Label::Target
        } else {
            Label::NonTarget
        };
        self.sim.generate_into(label, rng, &mut self.buf);
        self.model.score_values(&self.buf)
    }
}

/// Free-function form of [`P300Channel::reward`].
pub fn p300_reward_channel<R: Rng + ?Sized>(
    channel: &mut P300Channel,
    target: usize,
    pulled: usize,
    rng: &mut R,
) -> Result<f64> {
    channel.reward(target, pulled, rng)
}
