//! Bandit environments and task sequences.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_arm, Error, Result};
use crate::priors::{validate_distribution, GaussianUPrior, MixturePriorParams, PriorProvider};

const MAX_CONDITIONAL_REDRAWS: usize = 10_000;

/// One task: arm `i` pays `theta[i]` plus Gaussian noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    theta: Vec<f64>,
    noise_sd: f64,
    optimal_arm: usize,
}

impl Environment {
    pub fn new(theta: Vec<f64>, noise_sd: f64) -> Result<Self> {
        if theta.len() < 2 {
            return Err(Error::invalid("theta", "need at least two arms"));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("theta", "entries must be finite"));
        }
        if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
            return Err(Error::invalid(
                "noise_sd",
                format!("{noise_sd} is not a standard deviation"),
            ));
        }
        let optimal_arm = argmax(&theta);
        let best = theta[optimal_arm];
        if theta.iter().filter(|&&x| x == best).count() > 1 {
            return Err(Error::invalid("theta", "optimal arm is not unique"));
        }
        Ok(Self {
            theta,
            noise_sd,
            optimal_arm,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn optimal_arm(&self) -> usize {
        self.optimal_arm
    }

    pub fn num_arms(&self) -> usize {
        self.theta.len()
    }

    pub fn pull<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        check_arm(arm, self.theta.len())?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(self.theta[arm] + z * self.noise_sd)
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn sample_categorical<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.iter().rposition(|p| *p > 0.0).unwrap_or(dist.len() - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSequence {
    tasks: Vec<Environment>,
}

impl TaskSequence {
    pub fn new(tasks: Vec<Environment>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::invalid("num_tasks", "need at least one task"));
        }
        Ok(Self { tasks })
    }

    pub fn tasks(&self) -> &[Environment] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn optimal_arms(&self) -> Vec<usize> {
        self.tasks.iter().map(Environment::optimal_arm).collect()
    }
}

/// Draws optimal arms through the chain rule, then each mean vector from the
/// conditional mean-reward prior. With `params.perturb` the means get
/// independent `N(0, sigma0^2)` noise, redrawn until the drawn arm stays optimal.
pub fn sample_task_sequence<P, R>(
    provider: &P,
    n_tasks: usize,
    params: &MixturePriorParams,
    noise_sd: f64,
    rng: &mut R,
) -> Result<TaskSequence>
where
    P: PriorProvider + ?Sized,
    R: Rng + ?Sized,
{
    if n_tasks == 0 {
        return Err(Error::invalid("num_tasks", "need at least one task"));
    }
    params.validate()?;
    let j = provider.num_arms();
    let mut tasks = Vec::with_capacity(n_tasks);
    let mut prev = None;
    for _ in 0..n_tasks {
        let dist = provider.dist_given(prev)?;
        if dist.len() != j {
            return Err(Error::DimensionMismatch {
                expected: j,
                got: dist.len(),
            });
        }
        validate_distribution(&dist, 1e-9)?;
        let arm = sample_categorical(&dist, rng);
        let mean = params.conditional_mean(arm, j);
        let theta = if params.perturb {
            perturbed_with_optimum(&mean, params.sigma0, arm, rng)?
        } else {
            mean
        };
        let env = Environment::new(theta, noise_sd)?;
        debug_assert_eq!(env.optimal_arm(), arm);
        prev = Some(arm);
        tasks.push(env);
    }
    TaskSequence::new(tasks)
}

fn perturbed_with_optimum<R: Rng + ?Sized>(mean: &[f64], sd: f64, arm: usize, rng: &mut R) -> Result<Vec<f64>> {
    for _ in 0..MAX_CONDITIONAL_REDRAWS {
        let theta: Vec<f64> = mean
            .iter()
            .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if argmax(&theta) == arm {
            return Ok(theta);
        }
    }
    Err(Error::invalid(
        "sigma0",
        "perturbation too large relative to the gap to keep the drawn arm optimal",
    ))
}

/// Draws each task's means from the structured Gaussian prior; the optimal
/// arm is whichever arm the draw puts on top.
pub fn sample_gaussian_u_sequence<R: Rng + ?Sized>(
    prior: &GaussianUPrior,
    n_tasks: usize,
    noise_sd: f64,
    rng: &mut R,
) -> Result<TaskSequence> {
    if n_tasks == 0 {
        return Err(Error::invalid("num_tasks", "need at least one task"));
    }
    let j = prior.num_arms();
    let mut tasks = Vec::with_capacity(n_tasks);
    let mut prev: Option<usize> = None;
    for _ in 0..n_tasks {
        let mean = match prev {
            None => {
                let first = rng.random_range(0..j);
                prior.first_task_means().swap_remove(first)
            }
            Some(p) => crate::priors::gaussian_prior_from_u(p, prior)?.0,
        };
        let theta: Vec<f64> = mean
            .iter()
            .map(|m| m + prior.sigma0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let env = Environment::new(theta, noise_sd)?;
        prev = Some(env.optimal_arm());
        tasks.push(env);
    }
    TaskSequence::new(tasks)
}
