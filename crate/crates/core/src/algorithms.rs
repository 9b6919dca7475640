//! Arm-selection rules.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{check_arm, Error, Result};
use crate::posterior::{MixturePosterior, SufficientStats};
use crate::priors::{build_mixture_prior, MixturePriorParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopTwoConfig {
    /// Probability of pulling the leader rather than the challenger.
    pub beta: f64,
    /// Re-draws allowed while looking for a challenger distinct from the leader.
    pub max_resample: usize,
}

impl Default for TopTwoConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            max_resample: 100,
        }
    }
}

impl TopTwoConfig {
    pub fn new(beta: f64, max_resample: usize) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid("beta", format!("{beta} not in (0, 1]")));
        }
        if max_resample == 0 {
            return Err(Error::invalid("max_resample", "must be at least 1"));
        }
        Ok(Self { beta, max_resample })
    }
}

/// Top-two Thompson sampling. The leader is the argmax of one posterior
/// draw; with probability `1 - beta` the pull goes to the first re-draw whose
/// argmax differs. If `max_resample` re-draws all agree with the leader, the
/// leader is pulled.
pub fn top_two_select<R: Rng + ?Sized>(post: &MixturePosterior, cfg: &TopTwoConfig, rng: &mut R) -> usize {
    let leader = post.sample_argmax(rng);
    // The coin is independent of the draws, so flipping it first spares the
    // challenger search whenever the leader is pulled.
    if cfg.beta >= 1.0 || rng.random::<f64>() < cfg.beta {
        return leader;
    }
    for _ in 0..cfg.max_resample {
        let challenger = post.sample_argmax(rng);
        if challenger != leader {
            return challenger;
        }
    }
    leader
}

/// Uniform mixture prior used by vanilla top-two sampling.
pub fn vtts_prior(n_arms: usize, params: &MixturePriorParams, noise_var: f64) -> Result<MixturePosterior> {
    build_mixture_prior(&vec![1.0 / n_arms as f64; n_arms], params, noise_var)
}

pub fn random_select<R: Rng + ?Sized>(n_arms: usize, rng: &mut R) -> usize {
    rng.random_range(0..n_arms)
}

/// Batch racing: every surviving arm is pulled once per round, then arms
/// whose upper confidence bound falls below the best lower bound drop out.
#[derive(Clone, Debug)]
pub struct BatchRacing {
    n_arms: usize,
    surviving: Vec<usize>,
    stats: SufficientStats,
    delta_task: f64,
    shrink: f64,
    round: u64,
}

impl BatchRacing {
    pub const DEFAULT_SHRINK: f64 = 0.25;

    pub fn new(n_arms: usize, noise_var: f64, delta_task: f64, shrink: f64) -> Result<Self> {
        if n_arms == 0 {
            return Err(Error::invalid("num_arms", "need at least one arm"));
        }
        if !(delta_task > 0.0 && delta_task < 1.0) {
            return Err(Error::invalid("delta", format!("{delta_task} not in (0, 1)")));
        }
        if !(shrink > 0.0 && shrink <= 1.0) {
            return Err(Error::invalid("shrink", format!("{shrink} not in (0, 1]")));
        }
        Ok(Self {
            n_arms,
            surviving: (0..n_arms).collect(),
            stats: SufficientStats::new(n_arms, noise_var)?,
            delta_task,
            shrink,
            round: 0,
        })
    }

    pub fn surviving(&self) -> &[usize] {
        &self.surviving
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn is_done(&self) -> bool {
        self.surviving.len() == 1
    }

    pub fn record(&mut self, arm: usize, reward: f64) -> Result<()> {
        check_arm(arm, self.n_arms)?;
        if !reward.is_finite() {
            return Err(Error::NonFiniteReward(reward));
        }
        self.stats.record(arm, reward);
        Ok(())
    }

    /// Confidence radius `shrink * sqrt(2 s^2 ln(4 J t^2 / delta) / N)`, where
    /// `t` counts all pulls made in the task so far.
    pub fn radius(&self, arm: usize, t: u64) -> f64 {
        let n = self.stats.pulls()[arm];
        if n == 0 {
            return f64::INFINITY;
        }
        let t = t.max(1) as f64;
        let log_term = (4.0 * self.n_arms as f64 * t * t / self.delta_task).ln();
        self.shrink * (2.0 * self.stats.noise_var() * log_term / n as f64).sqrt()
    }

    fn mean(&self, arm: usize) -> f64 {
        self.stats.empirical_mean(arm).unwrap_or(f64::NEG_INFINITY)
    }

    /// Empirically best surviving arm; lowest index on ties.
    pub fn best(&self) -> usize {
        let mut best = self.surviving[0];
        for &a in &self.surviving[1..] {
            if self.mean(a) > self.mean(best) {
                best = a;
            }
        }
        best
    }

    /// Closes the current round and eliminates dominated arms.
    pub fn end_round(&mut self) -> &[usize] {
        self.round += 1;
        let t = self.stats.total_pulls();
        let leader = self.best();
        let best_lcb = self
            .surviving
            .iter()
            .map(|&a| self.mean(a) - self.radius(a, t))
            .fold(f64::NEG_INFINITY, f64::max);
        let keep: Vec<usize> = self
            .surviving
            .iter()
            .copied()
            .filter(|&a| a == leader || self.mean(a) + self.radius(a, t) >= best_lcb)
            .collect();
        self.surviving = keep;
        &self.surviving
    }
}

/// Runs one full round: pulls every surviving arm once through `pull`, then
/// eliminates. Returns the arms pulled and the surviving set.
pub fn br_round<F>(state: &mut BatchRacing, mut pull: F) -> Result<(Vec<usize>, Vec<usize>)>
where
    F: FnMut(usize) -> Result<f64>,
{
    let batch = state.surviving.clone();
    if batch.len() > 1 {
        for &arm in &batch {
            let r = pull(arm)?;
            state.record(arm, r)?;
        }
        state.end_round();
    }
    Ok((batch, state.surviving.clone()))
}

/// Beta-Bernoulli Thompson sampling on binarized scores.
#[derive(Clone, Debug, PartialEq)]
pub struct BbtsState {
    pub alpha: Vec<f64>,
    pub beta_counts: Vec<f64>,
    pub threshold: f64,
    pub p_max: f64,
}

impl BbtsState {
    pub fn new(n_arms: usize, threshold: f64, p_max: f64) -> Result<Self> {
        if !(p_max > 0.0 && p_max < 1.0) {
            return Err(Error::invalid("p_max", format!("{p_max} not in (0, 1)")));
        }
        if !threshold.is_finite() {
            return Err(Error::invalid("threshold", "must be finite"));
        }
        Ok(Self {
            alpha: vec![1.0; n_arms],
            beta_counts: vec![1.0; n_arms],
            threshold,
            p_max,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.alpha.len()
    }

    pub fn posterior_mean(&self, arm: usize) -> f64 {
        self.alpha[arm] / (self.alpha[arm] + self.beta_counts[arm])
    }

    /// Arm with the highest posterior success probability.
    pub fn best(&self) -> usize {
        let means: Vec<f64> = (0..self.n_arms()).map(|a| self.posterior_mean(a)).collect();
        crate::env::argmax(&means)
    }
}

/// `1 - delta / (1000 M)`.
pub fn bbts_p_max(delta: f64, n_tasks: usize) -> f64 {
    1.0 - delta / (1000.0 * n_tasks as f64)
}

pub fn bbts_step<R: Rng + ?Sized>(state: &BbtsState, rng: &mut R) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for a in 0..state.n_arms() {
        let x = Beta::new(state.alpha[a], state.beta_counts[a])
            .expect("Beta parameters stay positive")
            .sample(rng);
        if x > best_val {
            best_val = x;
            best = a;
        }
    }
    best
}

/// A score strictly above the threshold counts as a success.
pub fn bbts_update(state: &mut BbtsState, arm: usize, reward: f64) -> Result<()> {
    check_arm(arm, state.n_arms())?;
    if reward > state.threshold {
        state.alpha[arm] += 1.0;
    } else {
        state.beta_counts[arm] += 1.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn freq_check(counts: &[usize], probs: &[f64], n: usize) {
        for (c, p) in counts.iter().zip(probs) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let f = *c as f64 / n as f64;
            assert!((f - p).abs() <= 3.0 * se + 1e-4, "freq {f} vs {p}");
        }
    }

    #[test]
    fn beta_one_is_thompson_sampling() {
        let params = MixturePriorParams::default();
        let mut post = build_mixture_prior(&[0.4, 0.3, 0.2, 0.1], &params, 1.0).unwrap();
        post.update(1, 1.2).unwrap();
        let cfg = TopTwoConfig::new(1.0, 100).unwrap();
        let n = 100_000;
        let mut tts = [0usize; 4];
        let mut ts = [0usize; 4];
        let mut r1 = RngStream::from_seed(1);
        let mut r2 = RngStream::from_seed(2);
        for _ in 0..n {
            tts[top_two_select(&post, &cfg, &mut r1)] += 1;
            ts[post.sample_argmax(&mut r2)] += 1;
        }
        // Two-sample comparison of proportions per arm.
        for a in 0..4 {
            let (p1, p2) = (tts[a] as f64 / n as f64, ts[a] as f64 / n as f64);
            let p = (p1 + p2) / 2.0;
            let se = (2.0 * p * (1.0 - p) / n as f64).sqrt();
            assert!((p1 - p2).abs() < 3.5 * se + 1e-4, "arm {a}: {p1} vs {p2}");
        }
    }

    #[test]
    fn support_restricted_to_leader_and_challenger() {
        let mut means = vec![0.0; 4];
        means[2] = 5.0;
        let mut alt = vec![0.0; 4];
        alt[0] = 5.0;
        let mut all = means.clone();
        all.extend(alt);
        let post = MixturePosterior::from_components(&[0.999, 0.001], all, vec![1e-4; 8], 1.0).unwrap();
        let cfg = TopTwoConfig::default();
        let mut rng = RngStream::from_seed(3);
        for _ in 0..5000 {
            let a = top_two_select(&post, &cfg, &mut rng);
            assert!(a == 2 || a == 0);
        }
    }

    #[test]
    fn symmetric_two_arms_half_half() {
        let post = vtts_prior(2, &MixturePriorParams::default(), 1.0).unwrap();
        let cfg = TopTwoConfig::default();
        let mut rng = RngStream::from_seed(4);
        let n = 100_000;
        let mut counts = [0usize; 2];
        for _ in 0..n {
            counts[top_two_select(&post, &cfg, &mut rng)] += 1;
        }
        freq_check(&counts, &[0.5, 0.5], n);
    }

    #[test]
    fn degenerate_posterior_falls_back_to_leader() {
        let post = MixturePosterior::gaussian(vec![0.0, 3.0, 0.0], vec![0.0; 3], 1.0).unwrap();
        let cfg = TopTwoConfig::new(0.5, 10).unwrap();
        let mut rng = RngStream::from_seed(5);
        for _ in 0..100 {
            assert_eq!(top_two_select(&post, &cfg, &mut rng), 1);
        }
    }

    #[test]
    fn selection_invariant_to_common_shift() {
        let params = MixturePriorParams::default();
        let shifted = MixturePriorParams { mu: 7.5, ..params };
        let a = build_mixture_prior(&[0.3, 0.5, 0.2], &params, 1.0).unwrap();
        let b = build_mixture_prior(&[0.3, 0.5, 0.2], &shifted, 1.0).unwrap();
        let cfg = TopTwoConfig::default();
        let mut r1 = RngStream::from_seed(6);
        let mut r2 = RngStream::from_seed(6);
        for _ in 0..2000 {
            assert_eq!(top_two_select(&a, &cfg, &mut r1), top_two_select(&b, &cfg, &mut r2));
        }
    }

    #[test]
    fn point_mass_prior_leader_is_true_best() {
        let mut w = vec![0.0; 5];
        w[3] = 1.0;
        let params = MixturePriorParams {
            sigma0: 1e-3,
            ..Default::default()
        };
        let post = build_mixture_prior(&w, &params, 1.0).unwrap();
        let mut rng = RngStream::from_seed(7);
        for _ in 0..1000 {
            assert_eq!(post.sample_argmax(&mut rng), 3);
        }
    }

    #[test]
    fn vtts_prior_marginals() {
        let p = MixturePriorParams::default();
        let post = vtts_prior(10, &p, 1.0).unwrap();
        assert!(post.prob_optimal().iter().all(|w| (w - 0.1).abs() < 1e-12));
        let post = vtts_prior(2, &p, 1.0).unwrap();
        assert!((post.moments(0).unwrap().0 - 1.0).abs() < 1e-12);
        assert_eq!(post, build_mixture_prior(&[0.5, 0.5], &p, 1.0).unwrap());
    }

    #[test]
    fn random_policy() {
        let mut rng = RngStream::from_seed(8);
        assert!((0..100).all(|_| random_select(1, &mut rng) == 0));
        let n = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..n {
            counts[random_select(10, &mut rng)] += 1;
        }
        freq_check(&counts, &[0.1; 10], n);
        let a: Vec<usize> = (0..20)
            .map(|_| random_select(10, &mut RngStream::from_seed(9)))
            .collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn batch_racing_eliminates_clear_loser() {
        let mut br = BatchRacing::new(2, 1.0, 0.1, 0.25).unwrap();
        for _ in 0..50 {
            br.record(0, 10.0).unwrap();
            br.record(1, 0.0).unwrap();
        }
        // After 100 pulls: 0.25 * sqrt(2 ln(4 * 2 * 100^2 / 0.1) / 50) ~ 0.18.
        let r = br.radius(1, 100);
        assert!((r - 0.25 * (2.0 * (800_000f64).ln() / 50.0).sqrt()).abs() < 1e-12);
        assert!(r < 0.2);
        assert_eq!(br.end_round(), &[0]);
        assert!(br.is_done());
        let (pulled, left) = br_round(&mut br, |_| Ok(0.0)).unwrap();
        assert_eq!(pulled, vec![0]);
        assert_eq!(left, vec![0]);
    }

    #[test]
    fn batch_racing_keeps_symmetric_arms() {
        let mut br = BatchRacing::new(3, 1.0, 0.1, 0.25).unwrap();
        let (pulled, left) = br_round(&mut br, |_| Ok(1.0)).unwrap();
        assert_eq!(pulled, vec![0, 1, 2]);
        assert_eq!(left, vec![0, 1, 2]);
    }

    #[test]
    fn batch_racing_never_drops_empirical_best() {
        let mut rng = RngStream::from_seed(10);
        for _ in 0..50 {
            let mut br = BatchRacing::new(6, 1.0, 0.05, 0.25).unwrap();
            let mut prev = br.surviving().len();
            while !br.is_done() && br.round() < 200 {
                let best_before_pull = br.surviving().to_vec();
                br_round(&mut br, |a| {
                    Ok(a as f64 * 0.3 + rng.sample::<f64, _>(rand_distr::StandardNormal))
                })
                .unwrap();
                let means: Vec<f64> = best_before_pull
                    .iter()
                    .map(|&a| br.stats().empirical_mean(a).unwrap())
                    .collect();
                let emp_best = best_before_pull[crate::env::argmax(&means)];
                assert!(br.surviving().contains(&emp_best));
                assert!(br.surviving().len() <= prev);
                prev = br.surviving().len();
            }
        }
    }

    #[test]
    fn bbts_uniform_selection() {
        let state = BbtsState::new(4, 0.0, 0.99).unwrap();
        let mut rng = RngStream::from_seed(11);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[bbts_step(&state, &mut rng)] += 1;
        }
        freq_check(&counts, &[0.25; 4], n);
    }

    #[test]
    fn bbts_prefers_successful_arm() {
        let mut state = BbtsState::new(4, 0.0, 0.99).unwrap();
        for _ in 0..100 {
            bbts_update(&mut state, 1, 1.0).unwrap();
        }
        let mut rng = RngStream::from_seed(12);
        let hits = (0..10_000).filter(|_| bbts_step(&state, &mut rng) == 1).count();
        assert!(hits as f64 / 10_000.0 > 0.95);
    }

    #[test]
    fn bbts_threshold_tie_is_failure() {
        let mut state = BbtsState::new(2, 0.5, 0.99).unwrap();
        bbts_update(&mut state, 0, 0.5).unwrap();
        assert_eq!((state.alpha[0], state.beta_counts[0]), (1.0, 2.0));
        bbts_update(&mut state, 0, 0.50001).unwrap();
        assert_eq!(state.alpha[0], 2.0);
    }

    #[test]
    fn bbts_p_max_formula() {
        assert!((bbts_p_max(0.1, 20) - 0.999995).abs() < 1e-15);
    }
}
