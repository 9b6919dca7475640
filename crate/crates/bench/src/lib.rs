//! Fixtures shared by the benchmarks in `benches/`.

use stts_core::harness::{Algorithm, ExperimentConfig};
use stts_core::p300::{train_swlda, EegConfig, EegSimulator, SwldaModel, SwldaParams};
use stts_core::priors::{build_mixture_prior, markov_next_dist, MarkovPrior, MixturePriorParams};
use stts_core::{MixturePosterior, RngStream};

/// Markov-prior mixture over `n_arms` arms after `pulls` rewards, each arm
/// pulled in turn.
pub fn warm_posterior(n_arms: usize, p: f64, pulls: usize) -> MixturePosterior {
    let weights = markov_next_dist(0, &MarkovPrior::new(p, n_arms).expect("valid p")).expect("valid arm");
    let mut post = build_mixture_prior(&weights, &MixturePriorParams::default(), 1.0).expect("valid prior");
    for i in 0..pulls {
        let arm = i % n_arms;
        let r = if arm == 1 { 2.0 } else { 0.0 };
        post.update(arm, r).expect("arm in range");
    }
    post
}

/// Default-sized simulator and a classifier trained on its calibration set.
pub fn speller_fixture(seed: u64) -> (EegSimulator, SwldaModel) {
    let sim = EegSimulator::new(EegConfig {
        nontarget_amp: stts_core::harness::P300_NONTARGET_AMP,
        ..Default::default()
    })
    .expect("valid config");
    let mut rng = RngStream::from_seed(seed);
    let data = sim
        .generate_calibration(300, 1500, &mut rng)
        .expect("non-empty classes");
    let model = train_swlda(&data, &SwldaParams::default(), &mut rng).expect("trainable");
    (sim, model)
}

/// A small synthetic experiment: `replications` runs of 20 tasks over 10 arms.
pub fn small_experiment(algorithm: Algorithm, replications: usize) -> ExperimentConfig {
    ExperimentConfig {
        algorithm,
        replications,
        p: Some(0.5),
        ..Default::default()
    }
}
