//! Exact Gaussian-mixture posterior over the mean-reward vector.
//!
//! The belief is a mixture of `K` components. Given a component, arms are
//! independent Gaussians, so a reward on one arm updates one Gaussian per
//! component conjugately and reweights components by the reward's predictive
//! likelihood. Per-arm marginals are therefore mixtures too, and the moments
//! follow from the law of total variance.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_arm, Error, Result};
use crate::priors::validate_distribution;

/// Log-weights never drop below `ln(1e-300)`, so a component that the data
/// has all but ruled out can still recover.
pub const LOG_WEIGHT_FLOOR: f64 = -690.775_527_898_213_7;

#[derive(Clone, Debug, PartialEq)]
pub struct SufficientStats {
    pulls: Vec<u64>,
    reward_sums: Vec<f64>,
    noise_var: f64,
}

impl SufficientStats {
    pub fn new(n_arms: usize, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::invalid("noise_var", format!("{noise_var} must be positive")));
        }
        Ok(Self {
            pulls: vec![0; n_arms],
            reward_sums: vec![0.0; n_arms],
            noise_var,
        })
    }

    pub fn record(&mut self, arm: usize, reward: f64) {
        self.pulls[arm] += 1;
        self.reward_sums[arm] += reward;
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn reward_sums(&self) -> &[f64] {
        &self.reward_sums
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn total_pulls(&self) -> u64 {
        self.pulls.iter().sum()
    }

    /// Sample mean of an arm's rewards, `None` before its first pull.
    pub fn empirical_mean(&self, arm: usize) -> Option<f64> {
        (self.pulls[arm] > 0).then(|| self.reward_sums[arm] / self.pulls[arm] as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixturePosterior {
    n_arms: usize,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    // component-major: index c * n_arms + arm
    means: Vec<f64>,
    vars: Vec<f64>,
    stats: SufficientStats,
}

impl MixturePosterior {
    /// Builds a mixture from component weights and component-major arm
    /// parameters. Zero variances denote point masses.
    pub fn from_components(weights: &[f64], means: Vec<f64>, vars: Vec<f64>, noise_var: f64) -> Result<Self> {
        validate_distribution(weights, 1e-9)?;
        let k = weights.len();
        if means.len() % k != 0 || means.len() / k < 1 {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: means.len(),
            });
        }
        let n_arms = means.len() / k;
        if vars.len() != means.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                got: vars.len(),
            });
        }
        if let Some(v) = vars.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("variance", format!("{v} is not a valid variance")));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("mean", "component means must be finite"));
        }
        let mut post = Self {
            n_arms,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            weights: vec![0.0; k],
            means,
            vars,
            stats: SufficientStats::new(n_arms, noise_var)?,
        };
        post.normalize();
        Ok(post)
    }

    /// A single Gaussian with independent arms.
    pub fn gaussian(mean: Vec<f64>, var: Vec<f64>, noise_var: f64) -> Result<Self> {
        Self::from_components(&[1.0], mean, var, noise_var)
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    pub fn noise_var(&self) -> f64 {
        self.stats.noise_var
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn component_mean(&self, comp: usize, arm: usize) -> f64 {
        self.means[comp * self.n_arms + arm]
    }

    pub fn component_var(&self, comp: usize, arm: usize) -> f64 {
        self.vars[comp * self.n_arms + arm]
    }

    /// Component weights. For mixtures whose component j means "arm j is
    /// optimal" this is the posterior probability that each arm is optimal.
    pub fn prob_optimal(&self) -> Vec<f64> {
        self.weights.clone()
    }

    pub fn component_weights(&self) -> &[f64] {
        &self.weights
    }

    fn normalize(&mut self) {
        let lse = log_sum_exp(&self.log_weights);
        for lw in &mut self.log_weights {
            *lw = (*lw - lse).max(LOG_WEIGHT_FLOOR);
        }
        let lse = log_sum_exp(&self.log_weights);
        for (lw, w) in self.log_weights.iter_mut().zip(&mut self.weights) {
            *lw -= lse;
            *w = lw.exp();
        }
    }

    /// Conditions on one reward from `arm`.
    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        check_arm(arm, self.n_arms)?;
        if !reward.is_finite() {
            return Err(Error::NonFiniteReward(reward));
        }
        let s2 = self.stats.noise_var;
        for c in 0..self.weights.len() {
            let idx = c * self.n_arms + arm;
            let (m, v) = (self.means[idx], self.vars[idx]);
            let pred = v + s2;
            let resid = reward - m;
            self.log_weights[c] += -0.5 * pred.ln() - resid * resid / (2.0 * pred);
            if v > 0.0 {
                let prec = 1.0 / v + 1.0 / s2;
                self.means[idx] = (m / v + reward / s2) / prec;
                self.vars[idx] = 1.0 / prec;
            }
        }
        self.normalize();
        self.stats.record(arm, reward);
        Ok(())
    }

    fn draw_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.weights.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (c, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return c;
            }
        }
        // Rounding left `acc` just below 1.
        self.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    /// One draw of the mean-reward vector from the posterior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.n_arms];
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let c = self.draw_component(rng);
        let base = c * self.n_arms;
        for (i, x) in out.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *x = self.means[base + i] + z * self.vars[base + i].sqrt();
        }
    }

    /// Arm maximizing one posterior draw. Consumes the same random numbers as
    /// [`MixturePosterior::sample`], so it equals `argmax(sample(rng))`.
    pub fn sample_argmax<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let c = self.draw_component(rng);
        let base = c * self.n_arms;
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..self.n_arms {
            let z: f64 = rng.sample(StandardNormal);
            let x = self.means[base + i] + z * self.vars[base + i].sqrt();
            if x > best_val {
                best_val = x;
                best = i;
            }
        }
        best
    }

    /// Mean and variance of one arm's marginal.
    pub fn moments(&self, arm: usize) -> Result<(f64, f64)> {
        check_arm(arm, self.n_arms)?;
        Ok(self.moments_unchecked(arm))
    }

    fn moments_unchecked(&self, arm: usize) -> (f64, f64) {
        let mut mean = 0.0;
        let mut within = 0.0;
        for (c, w) in self.weights.iter().enumerate() {
            let idx = c * self.n_arms + arm;
            mean += w * self.means[idx];
            within += w * self.vars[idx];
        }
        let mut between = 0.0;
        for (c, w) in self.weights.iter().enumerate() {
            let d = self.means[c * self.n_arms + arm] - mean;
            between += w * d * d;
        }
        (mean, within + between)
    }

    /// Posterior means and variances of every arm.
    pub fn all_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let mut means = vec![0.0; self.n_arms];
        let mut vars = vec![0.0; self.n_arms];
        self.all_moments_into(&mut means, &mut vars);
        (means, vars)
    }

    pub fn all_moments_into(&self, means: &mut [f64], vars: &mut [f64]) {
        means.iter_mut().for_each(|m| *m = 0.0);
        vars.iter_mut().for_each(|v| *v = 0.0);
        for (c, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let base = c * self.n_arms;
            for i in 0..self.n_arms {
                means[i] += w * self.means[base + i];
                vars[i] += w * self.vars[base + i];
            }
        }
        for (c, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let base = c * self.n_arms;
            for i in 0..self.n_arms {
                let d = self.means[base + i] - means[i];
                vars[i] += w * d * d;
            }
        }
    }

    pub fn posterior_means(&self) -> Vec<f64> {
        self.all_moments().0
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{build_mixture_prior, MixturePriorParams};
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> MixturePriorParams {
        MixturePriorParams::default()
    }

    #[test]
    fn conjugate_single_component() {
        let mut post = MixturePosterior::gaussian(vec![0.0], vec![0.2], 1.0).unwrap();
        post.update(0, 2.0).unwrap();
        let (m, v) = post.moments(0).unwrap();
        assert_eq!(m, 1.0 / 3.0);
        assert_eq!(v, 1.0 / 6.0);
    }

    #[test]
    fn high_reward_raises_its_component() {
        let mut post = build_mixture_prior(&[0.5, 0.5], &params(), 1.0).unwrap();
        let before = post.prob_optimal()[0];
        post.update(0, 5.0).unwrap();
        assert!(post.prob_optimal()[0] > before);
    }

    #[test]
    fn rejects_bad_input() {
        let mut post = build_mixture_prior(&[0.5, 0.5], &params(), 1.0).unwrap();
        assert!(matches!(post.update(0, f64::NAN), Err(Error::NonFiniteReward(_))));
        assert!(post.update(2, 0.0).is_err());
        assert!(post.moments(2).is_err());
    }

    #[test]
    fn degenerate_draw() {
        let post = MixturePosterior::gaussian(vec![0.0, 2.0, 0.0], vec![0.0; 3], 1.0).unwrap();
        let mut rng = RngStream::from_seed(1);
        for _ in 0..10 {
            assert_eq!(post.sample(&mut rng), vec![0.0, 2.0, 0.0]);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let post = build_mixture_prior(&[0.2; 5], &params(), 1.0).unwrap();
        let a = post.sample(&mut RngStream::from_seed(5));
        let b = post.sample(&mut RngStream::from_seed(5));
        assert_eq!(a, b);
        let mut r1 = RngStream::from_seed(8);
        let mut r2 = RngStream::from_seed(8);
        for _ in 0..100 {
            let s = post.sample(&mut r1);
            let best = (0..5).max_by(|&i, &j| s[i].total_cmp(&s[j])).unwrap();
            assert_eq!(post.sample_argmax(&mut r2), best);
        }
    }

    #[test]
    fn uniform_prior_argmax_is_uniform() {
        let j = 10;
        let post = build_mixture_prior(&vec![0.1; j], &params(), 1.0).unwrap();
        let mut rng = RngStream::from_seed(11);
        let n = 100_000;
        let mut counts = vec![0usize; j];
        for _ in 0..n {
            counts[post.sample_argmax(&mut rng)] += 1;
        }
        let se = (0.1 * 0.9 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.1).abs() < 3.0 * se + 1e-3, "count {c}");
        }
    }

    #[test]
    fn moments_closed_forms() {
        let post = MixturePosterior::gaussian(vec![1.5, -2.0], vec![0.3, 0.7], 1.0).unwrap();
        assert_eq!(post.moments(0).unwrap(), (1.5, 0.3));
        assert_eq!(post.moments(1).unwrap(), (-2.0, 0.7));

        let post = MixturePosterior::from_components(&[0.5, 0.5], vec![0.0, 2.0], vec![0.0, 0.0], 1.0).unwrap();
        let (m, v) = post.moments(0).unwrap();
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn moments_match_monte_carlo() {
        let mut post = build_mixture_prior(&[0.5, 0.3, 0.2], &params(), 1.0).unwrap();
        for (a, r) in [(0, 0.4), (1, 2.5), (2, -0.3)] {
            post.update(a, r).unwrap();
        }
        let mut rng = RngStream::from_seed(3);
        let n = 1_000_000;
        let mut s1 = [0.0; 3];
        let mut s2 = [0.0; 3];
        let mut buf = [0.0; 3];
        for _ in 0..n {
            post.sample_into(&mut rng, &mut buf);
            for i in 0..3 {
                s1[i] += buf[i];
                s2[i] += buf[i] * buf[i];
            }
        }
        for i in 0..3 {
            let (m, v) = post.moments(i).unwrap();
            let em = s1[i] / n as f64;
            let ev = s2[i] / n as f64 - em * em;
            assert!((em - m).abs() < 3.0 * (v / n as f64).sqrt(), "arm {i}: {em} vs {m}");
            // var of the sample variance is bounded by E[(x - m)^4] / n; use a loose 4-sigma for mixtures.
            assert!(
                (ev - v).abs() < 4.0 * v * (3.0f64 / n as f64).sqrt() * 2.0,
                "arm {i}: {ev} vs {v}"
            );
        }
    }

    #[test]
    fn concentrates_on_true_best() {
        let j = 10;
        let mut post = build_mixture_prior(&vec![0.1; j], &params(), 1.0).unwrap();
        let env = crate::env::Environment::new(params().conditional_mean(4, j), 1.0).unwrap();
        let mut rng = RngStream::from_seed(21);
        for t in 0..200 {
            let arm = t % j;
            let r = env.pull(arm, &mut rng).unwrap();
            post.update(arm, r).unwrap();
        }
        assert!(post.prob_optimal()[4] >= 0.99);
    }

    #[test]
    fn symmetric_data_gives_equal_weights() {
        let mut post = build_mixture_prior(&[0.5, 0.5], &params(), 1.0).unwrap();
        for r in [0.3, 1.7, -0.2] {
            post.update(0, r).unwrap();
            post.update(1, r).unwrap();
        }
        for w in post.prob_optimal() {
            assert_abs_diff_eq!(w, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn weights_never_vanish() {
        let mut point = vec![0.0; 3];
        point[0] = 1.0;
        let mut post = build_mixture_prior(&point, &params(), 1.0).unwrap();
        for _ in 0..2000 {
            post.update(0, -3.0).unwrap();
        }
        assert!(post.log_weights().iter().all(|lw| lw.is_finite()));
        assert!(post.log_weights()[1] >= LOG_WEIGHT_FLOOR - 1e-9);
    }

    /// Brute-force marginal: quadrature over each arm's mean given each
    /// component, without any conjugate algebra.
    pub(crate) fn grid_marginals(
        weights: &[f64],
        comp_means: &[Vec<f64>],
        comp_var: f64,
        noise_var: f64,
        obs: &[(usize, f64)],
        grid: &[f64],
    ) -> Vec<Vec<f64>> {
        let j = comp_means[0].len();
        let h = grid[1] - grid[0];
        let normal =
            |x: f64, m: f64, v: f64| (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let lik = |arm: usize, theta: f64| -> f64 {
            obs.iter()
                .filter(|(a, _)| *a == arm)
                .map(|(_, r)| normal(*r, theta, noise_var))
                .product()
        };
        // unnormalized[c][i][g] = prior_c,i(grid g) * lik_i(grid g)
        let un: Vec<Vec<Vec<f64>>> = comp_means
            .iter()
            .map(|means| {
                (0..j)
                    .map(|i| {
                        grid.iter()
                            .map(|&x| normal(x, means[i], comp_var) * lik(i, x))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let evidence: Vec<Vec<f64>> = un
            .iter()
            .map(|c| c.iter().map(|g| g.iter().sum::<f64>() * h).collect())
            .collect();
        (0..j)
            .map(|i| {
                let mut dens = vec![0.0; grid.len()];
                for (c, w) in weights.iter().enumerate() {
                    let others: f64 = (0..j).filter(|&k| k != i).map(|k| evidence[c][k]).product();
                    for (g, d) in dens.iter_mut().enumerate() {
                        *d += w * others * un[c][i][g];
                    }
                }
                let z: f64 = dens.iter().sum::<f64>() * h;
                dens.iter().map(|d| d / z).collect()
            })
            .collect()
    }

    pub(crate) fn mixture_density(post: &MixturePosterior, arm: usize, x: f64) -> f64 {
        (0..post.n_components())
            .map(|c| {
                let (m, v) = (post.component_mean(c, arm), post.component_var(c, arm));
                post.component_weights()[c] * (-(x - m) * (x - m) / (2.0 * v)).exp()
                    / (2.0 * std::f64::consts::PI * v).sqrt()
            })
            .sum()
    }

    #[test]
    fn matches_grid_oracle() {
        let p = params();
        let weights = [0.5, 0.3, 0.2];
        let obs = [(0, 0.4), (1, 2.6), (1, 1.1), (2, -0.5), (0, 0.9)];
        let mut post = build_mixture_prior(&weights, &p, 1.0).unwrap();
        for &(a, r) in &obs {
            post.update(a, r).unwrap();
        }
        let grid: Vec<f64> = (0..8001).map(|g| -6.0 + 12.0 * g as f64 / 8000.0).collect();
        let h = grid[1] - grid[0];
        let comp_means: Vec<Vec<f64>> = (0..3).map(|c| p.conditional_mean(c, 3)).collect();
        let oracle = grid_marginals(&weights, &comp_means, 0.2, 1.0, &obs, &grid);
        for arm in 0..3 {
            let tv: f64 = 0.5
                * grid
                    .iter()
                    .zip(&oracle[arm])
                    .map(|(&x, q)| (mixture_density(&post, arm, x) - q).abs())
                    .sum::<f64>()
                * h;
            assert!(tv < 1e-3, "arm {arm}: tv {tv}");
        }
    }

    proptest! {
        #[test]
        fn order_invariance(obs in prop::collection::vec((0usize..4, -3.0f64..5.0), 1..12), seed in 0u64..1000) {
            let weights = [0.4, 0.3, 0.2, 0.1];
            let mut a = build_mixture_prior(&weights, &params(), 1.0).unwrap();
            for &(arm, r) in &obs {
                a.update(arm, r).unwrap();
            }
            let mut shuffled = obs.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut RngStream::from_seed(seed));
            let mut b = build_mixture_prior(&weights, &params(), 1.0).unwrap();
            for &(arm, r) in &shuffled {
                b.update(arm, r).unwrap();
            }
            for (x, y) in a.log_weights().iter().zip(b.log_weights()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            for (x, y) in a.means.iter().zip(&b.means) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            for (x, y) in a.vars.iter().zip(&b.vars) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            prop_assert!(log_sum_exp(a.log_weights()).abs() < 1e-9);
        }

        #[test]
        fn permutation_symmetry(rewards in prop::collection::vec(-2.0f64..4.0, 1..6)) {
            // Same data on every arm under uniform weights: all arms look alike.
            let mut post = build_mixture_prior(&[0.25; 4], &params(), 1.0).unwrap();
            for r in &rewards {
                for arm in 0..4 {
                    post.update(arm, *r).unwrap();
                }
            }
            let (m0, v0) = post.moments(0).unwrap();
            for arm in 1..4 {
                let (m, v) = post.moments(arm).unwrap();
                prop_assert!((m - m0).abs() < 1e-9 && (v - v0).abs() < 1e-9);
            }
        }

        #[test]
        fn variance_bounded_below(obs in prop::collection::vec((0usize..3, -3.0f64..5.0), 0..10)) {
            let mut post = build_mixture_prior(&[0.2, 0.5, 0.3], &params(), 1.0).unwrap();
            for &(a, r) in &obs {
                post.update(a, r).unwrap();
            }
            for arm in 0..3 {
                let (_, v) = post.moments(arm).unwrap();
                let min_v = (0..3).map(|c| post.component_var(c, arm)).fold(f64::INFINITY, f64::min);
                prop_assert!(v >= min_v - 1e-12);
            }
        }
    }
}
