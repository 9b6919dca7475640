//! Error-bound calculators and allocation diagnostics.

use serde::Serialize;

use crate::error::{check_arm, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    /// Budget per task.
    pub n: u64,
    pub n_arms: usize,
    /// Per-task sub-optimality gap.
    pub gaps: Vec<f64>,
    /// Per-task conditional entropy of the optimal arm, in nats.
    pub entropies: Vec<f64>,
    /// Cost charged per mistake in the oracle-feedback setting.
    pub mistake_cost: f64,
}

impl BoundInputs {
    /// Inputs with the same gap and entropy for every task.
    pub fn uniform(n: u64, n_arms: usize, n_tasks: usize, gap: f64, entropy: f64) -> Self {
        Self {
            n,
            n_arms,
            gaps: vec![gap; n_tasks],
            entropies: vec![entropy; n_tasks],
            mistake_cost: 1.0,
        }
    }

    pub fn n_tasks(&self) -> usize {
        self.gaps.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "budget must be at least 1"));
        }
        if self.n_arms < 2 {
            return Err(Error::invalid("num_arms", "need at least two arms"));
        }
        if self.gaps.is_empty() {
            return Err(Error::invalid("gaps", "need at least one task"));
        }
        if self.gaps.len() != self.entropies.len() {
            return Err(Error::DimensionMismatch {
                expected: self.gaps.len(),
                got: self.entropies.len(),
            });
        }
        if self.gaps.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::invalid("gaps", "must be positive and finite"));
        }
        let cap = (self.n_arms as f64).ln() + 1e-9;
        if self.entropies.iter().any(|h| !(*h >= 0.0 && *h <= cap)) {
            return Err(Error::invalid("entropies", "must lie in [0, ln J]"));
        }
        if !(self.mistake_cost >= 0.0) {
            return Err(Error::invalid("mistake_cost", "must be non-negative"));
        }
        Ok(())
    }

    /// Per-task error term `(6 / gap) sqrt(ln(J (1 + n)) H / (1 + n))`, unclipped.
    pub fn task_terms(&self) -> Vec<f64> {
        let n1 = 1.0 + self.n as f64;
        let log_term = (self.n_arms as f64 * n1).ln();
        self.gaps
            .iter()
            .zip(&self.entropies)
            .map(|(gap, h)| 6.0 / gap * (log_term * h / n1).sqrt())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundTerms {
    pub main: f64,
    pub remainder: f64,
    pub total: f64,
}

/// Average error-probability bound for a task sequence under a fixed budget.
///
/// The main term averages the unclipped per-task terms. The remainder is
/// `1 - (1/M) sum_m prod_{j<m} (1 - p_j)` with each `p_j` clipped to `[0, 1]`.
pub fn error_bound(inp: &BoundInputs) -> Result<BoundTerms> {
    inp.validate()?;
    let terms = inp.task_terms();
    let m = terms.len() as f64;
    let main = terms.iter().sum::<f64>() / m;
    let mut survive = 1.0;
    let mut acc = 0.0;
    for p in &terms {
        acc += survive;
        survive *= 1.0 - p.clamp(0.0, 1.0);
    }
    let remainder = 1.0 - acc / m;
    Ok(BoundTerms {
        main,
        remainder,
        total: main + remainder,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleBound {
    pub error_sum: f64,
    pub expected_mistake_cost: f64,
}

/// Expected number of mistakes (and their cost) when the true answer is
/// revealed after every task.
pub fn oracle_bound(inp: &BoundInputs) -> Result<OracleBound> {
    inp.validate()?;
    let error_sum: f64 = inp.task_terms().iter().map(|p| p.min(1.0)).sum();
    Ok(OracleBound {
        error_sum,
        expected_mistake_cost: inp.mistake_cost * error_sum,
    })
}

/// Target allocation: `beta` on the best arm, the rest spread evenly.
pub fn optimal_allocation(n_arms: usize, beta: f64, best_arm: usize) -> Result<Vec<f64>> {
    if n_arms < 2 {
        return Err(Error::invalid("num_arms", "need at least two arms"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid("beta", format!("{beta} not in [0, 1]")));
    }
    check_arm(best_arm, n_arms)?;
    let mut p = vec![(1.0 - beta) / (n_arms - 1) as f64; n_arms];
    p[best_arm] = beta;
    Ok(p)
}

/// `sum p_i ln(p_i / q_i)`, with `+inf` when `p` puts mass where `q` has none.
pub fn kl_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += pi * (pi / qi).ln();
    }
    Ok(kl.max(0.0))
}

/// Per-arm pull counts at round `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationSnapshot {
    pub counts: Vec<u64>,
    pub t: u64,
    pub best_arm: usize,
}

impl AllocationSnapshot {
    pub fn proportions(&self) -> Vec<f64> {
        if self.t == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / self.t as f64).collect()
    }
}

pub const DEFAULT_CHECKPOINTS: [u64; 10] = [50, 100, 150, 200, 250, 300, 350, 400, 450, 500];

/// KL divergence between the empirical allocation and the target allocation
/// at each checkpoint of a pull sequence.
pub fn allocation_trace(
    pulls: &[usize],
    n_arms: usize,
    best_arm: usize,
    beta: f64,
    checkpoints: &[u64],
) -> Result<Vec<(u64, f64)>> {
    if pulls.is_empty() {
        return Ok(Vec::new());
    }
    let target = optimal_allocation(n_arms, beta, best_arm)?;
    let len = pulls.len() as u64;
    if let Some(&bad) = checkpoints.iter().find(|&&c| c > len) {
        return Err(Error::CheckpointBeyondRun { checkpoint: bad, len });
    }
    let mut sorted = checkpoints.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut snap = AllocationSnapshot {
        counts: vec![0; n_arms],
        t: 0,
        best_arm,
    };
    let mut out = Vec::with_capacity(sorted.len());
    let mut next = sorted.iter().peekable();
    while next.peek().is_some_and(|&&c| c == 0) {
        next.next();
    }
    for &arm in pulls {
        check_arm(arm, n_arms)?;
        snap.counts[arm] += 1;
        snap.t += 1;
        while next.peek().is_some_and(|&&c| c == snap.t) {
            out.push((snap.t, kl_discrete(&snap.proportions(), &target)?));
            next.next();
        }
    }
    Ok(out)
}
