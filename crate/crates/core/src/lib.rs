//! Sequential best-arm identification with informative priors.
//!
//! Tasks arrive one after another; each task is a Gaussian bandit whose best
//! arm must be identified. Top-two Thompson sampling over a Gaussian mixture
//! posterior uses a prior built from the previous task's answer, so a good
//! language model over answers cuts the number of pulls per task.
//!
//! Module map:
//! - [`priors`]: Markov, structured-Gaussian and word-table priors.
//! - [`posterior`]: conjugate Gaussian-mixture posterior.
//! - [`env`]: bandit environments and task-sequence generation.
//! - [`algorithms`]: top-two sampling and the baselines.
//! - [`stopping`]: stopping and decision rules.
//! - [`theory`]: error-bound calculators and allocation diagnostics.
//! - [`p300`]: EEG speller reward simulation.
//! - [`harness`]: experiment orchestration and CSV output.

pub mod algorithms;
pub mod env;
pub mod error;
pub mod harness;
pub mod p300;
pub mod posterior;
pub mod priors;
pub mod rng;
pub mod stopping;
pub mod theory;

pub use error::{Error, Result};
pub use harness::{run_experiment, Algorithm, ExperimentConfig, Metrics, Scenario};
pub use posterior::{MixturePosterior, SufficientStats};
pub use rng::{Purpose, RngStream, StreamId};
