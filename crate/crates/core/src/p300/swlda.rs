//! Stepwise linear discriminant analysis.
//!
//! Labels are regressed (as +1 / -1) on the flattened epoch samples with
//! forward-backward stepwise selection. Entry and removal are decided by
//! partial F-test p-values, computed from a swept cross-product matrix.

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::eeg::{EegEpoch, Label};
use crate::error::{Error, Result};

/// Relative residual variance below which a candidate counts as collinear.
const COLLINEAR_TOL: f64 = 1e-9;
/// Fraction of the data held out for score statistics.
pub const HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwldaParams {
    pub p_enter: f64,
    pub p_remove: f64,
    pub max_features: usize,
}

impl Default for SwldaParams {
    fn default() -> Self {
        Self {
            p_enter: 0.10,
            p_remove: 0.15,
            max_features: 60,
        }
    }
}

/// Score distribution on held-out calibration epochs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibStats {
    pub target_mean: f64,
    pub target_var: f64,
    pub nontarget_mean: f64,
    pub nontarget_var: f64,
    pub n_target: usize,
    pub n_nontarget: usize,
}

impl CalibStats {
    pub fn from_scores(target: &[f64], nontarget: &[f64]) -> Result<Self> {
        if target.len() < 2 || nontarget.len() < 2 {
            return Err(Error::Training("need at least two held-out epochs per class".into()));
        }
        let (tm, tv) = mean_var(target);
        let (nm, nv) = mean_var(nontarget);
        Ok(Self {
            target_mean: tm,
            target_var: tv,
            nontarget_mean: nm,
            nontarget_var: nv,
            n_target: target.len(),
            n_nontarget: nontarget.len(),
        })
    }

    pub fn pooled_var(&self) -> f64 {
        let (a, b) = (self.n_target as f64 - 1.0, self.n_nontarget as f64 - 1.0);
        (a * self.target_var + b * self.nontarget_var) / (a + b)
    }

    /// Mean gap divided by the pooled standard deviation.
    pub fn standardized_gap(&self) -> f64 {
        (self.target_mean - self.nontarget_mean) / self.pooled_var().sqrt()
    }

    /// Maps a raw score onto the unit-variance scale where non-targets have mean 0.
    pub fn standardize(&self, score: f64) -> f64 {
        (score - self.nontarget_mean) / self.pooled_var().sqrt()
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwldaModel {
    pub n_electrodes: usize,
    pub window_len: usize,
    /// Selected `(electrode, sample)` pairs.
    pub selected: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub calib_stats: CalibStats,
}

impl SwldaModel {
    pub fn score_values(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.n_electrodes * self.window_len {
            return Err(Error::DimensionMismatch {
                expected: self.n_electrodes * self.window_len,
                got: values.len(),
            });
        }
        Ok(self.intercept
            + self
                .selected
                .iter()
                .zip(&self.weights)
                .map(|(&(e, s), w)| w * values[e * self.window_len + s])
                .sum::<f64>())
    }

    pub fn score(&self, epoch: &EegEpoch) -> Result<f64> {
        if epoch.n_electrodes != self.n_electrodes || epoch.window_len != self.window_len {
            return Err(Error::DimensionMismatch {
                expected: self.n_electrodes * self.window_len,
                got: epoch.n_electrodes * epoch.window_len,
            });
        }
        self.score_values(&epoch.values)
    }
}

pub fn score(model: &SwldaModel, epoch: &EegEpoch) -> Result<f64> {
    model.score(epoch)
}

/// Area under the ROC curve (Mann-Whitney), ties counted as one half.
pub fn auc(target: &[f64], nontarget: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &t in target {
        for &n in nontarget {
            if t > n {
                wins += 1.0;
            } else if t == n {
                wins += 0.5;
            }
        }
    }
    wins / (target.len() * nontarget.len()) as f64
}

/// Result of stepwise selection on a design matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct StepwiseFit {
    pub selected: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

/// Symmetric cross-product matrix with in-place sweeps.
struct SweepMatrix {
    dim: usize,
    a: Vec<f64>,
}

impl SweepMatrix {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.dim + j]
    }

    /// Forward sweep on `k` (`reverse = false`) or its inverse.
    fn sweep(&mut self, k: usize, reverse: bool) {
        let n = self.dim;
        let d = self.at(k, k);
        let col: Vec<f64> = (0..n).map(|i| self.at(i, k)).collect();
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = col[i] / d;
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * n..(i + 1) * n];
            for j in 0..n {
                if j != k {
                    row[j] -= f * col[j];
                }
            }
        }
        let sign = if reverse { -1.0 } else { 1.0 };
        for i in 0..n {
            if i != k {
                let v = sign * col[i] / d;
                self.a[i * n + k] = v;
                self.a[k * n + i] = v;
            }
        }
        self.a[k * n + k] = -1.0 / d;
    }
}

/// Forward-backward stepwise least squares of `y` on the columns of `x`
/// (row-major, `n_obs x n_feat`).
pub fn stepwise_regression(x: &[f64], y: &[f64], n_feat: usize, params: &SwldaParams) -> Result<StepwiseFit> {
    let n_obs = y.len();
    if x.len() != n_obs * n_feat {
        return Err(Error::DimensionMismatch {
            expected: n_obs * n_feat,
            got: x.len(),
        });
    }
    if n_obs <= params.max_features + 2 {
        return Err(Error::Training(format!(
            "{n_obs} observations are too few for up to {} features",
            params.max_features
        )));
    }
    let dim = n_feat + 1;
    let means: Vec<f64> = (0..dim)
        .map(|j| {
            (0..n_obs)
                .map(|i| if j < n_feat { x[i * n_feat + j] } else { y[i] })
                .sum::<f64>()
                / n_obs as f64
        })
        .collect();
    let mut a = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for i in 0..n_obs {
        for j in 0..n_feat {
            centered[j] = x[i * n_feat + j] - means[j];
        }
        centered[n_feat] = y[i] - means[n_feat];
        for j in 0..dim {
            let cj = centered[j];
            if cj == 0.0 {
                continue;
            }
            let row = &mut a[j * dim..(j + 1) * dim];
            for (r, &ck) in row[j..].iter_mut().zip(&centered[j..]) {
                *r += cj * ck;
            }
        }
    }
    for j in 0..dim {
        for k in 0..j {
            a[j * dim + k] = a[k * dim + j];
        }
    }
    let orig_diag: Vec<f64> = (0..dim).map(|j| a[j * dim + j]).collect();
    let scale = orig_diag.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut m = SweepMatrix { dim, a };
    let yi = n_feat;
    let mut in_model = vec![false; n_feat];
    let mut selected: Vec<usize> = Vec::new();
    let max_iter = 4 * params.max_features + 10;

    for _ in 0..max_iter {
        let rss = m.at(yi, yi).max(0.0);
        let q = selected.len();
        let mut changed = false;

        if q < params.max_features {
            let mut best: Option<(usize, f64, f64)> = None;
            for k in 0..n_feat {
                if in_model[k] {
                    continue;
                }
                let akk = m.at(k, k);
                if orig_diag[k] <= 1e-12 * scale || akk <= COLLINEAR_TOL * orig_diag[k] {
                    continue;
                }
                let red = m.at(k, yi).powi(2) / akk;
                let better = match best {
                    None => true,
                    Some((_, r, v)) => {
                        let tol = 1e-10 * r.abs().max(1e-300);
                        red > r + tol || ((red - r).abs() <= tol && akk > v)
                    }
                };
                if better {
                    best = Some((k, red, akk));
                }
            }
            if let Some((k, red, _)) = best {
                let df = n_obs as f64 - q as f64 - 2.0;
                let p = f_pvalue(red, (rss - red).max(0.0), df);
                if p < params.p_enter {
                    m.sweep(k, false);
                    in_model[k] = true;
                    selected.push(k);
                    changed = true;
                }
            }
        }

        let rss = m.at(yi, yi).max(0.0);
        let q = selected.len();
        if q > 1 {
            let df = n_obs as f64 - q as f64 - 1.0;
            let mut worst: Option<(usize, f64)> = None;
            for &k in &selected {
                let inc = m.at(k, yi).powi(2) / (-m.at(k, k));
                let p = f_pvalue(inc, rss, df);
                if worst.is_none_or(|(_, wp)| p > wp) {
                    worst = Some((k, p));
                }
            }
            if let Some((k, p)) = worst {
                if p > params.p_remove {
                    m.sweep(k, true);
                    in_model[k] = false;
                    selected.retain(|&s| s != k);
                    changed = true;
                }
            }
        }

        if !changed {
            break;
        }
    }

    if selected.is_empty() {
        return Err(Error::Training("no feature entered the model".into()));
    }
    let coefficients: Vec<f64> = selected.iter().map(|&k| m.at(k, yi)).collect();
    let intercept = means[yi]
        - selected
            .iter()
            .zip(&coefficients)
            .map(|(&k, b)| b * means[k])
            .sum::<f64>();
    Ok(StepwiseFit {
        selected,
        coefficients,
        intercept,
    })
}

/// Upper tail of `F(1, df)` at `(extra / 1) / (rss / df)`.
fn f_pvalue(extra: f64, rss: f64, df: f64) -> f64 {
    if df < 1.0 {
        return 1.0;
    }
    if rss <= 0.0 {
        return if extra > 0.0 { 0.0 } else { 1.0 };
    }
    let f = extra / (rss / df);
    if !f.is_finite() {
        return 0.0;
    }
    let dist = FisherSnedecor::new(1.0, df).expect("positive degrees of freedom");
    dist.sf(f)
}

/// Trains on a random 80% of `data` and scores the remaining 20% to fill
/// the calibration statistics.
pub fn train_swlda<R: Rng + ?Sized>(data: &[EegEpoch], params: &SwldaParams, rng: &mut R) -> Result<SwldaModel> {
    let first = data
        .first()
        .ok_or_else(|| Error::Training("empty calibration set".into()))?;
    let (ne, len) = (first.n_electrodes, first.window_len);
    if data.iter().any(|e| e.n_electrodes != ne || e.window_len != len) {
        return Err(Error::Training("epochs have inconsistent dimensions".into()));
    }
    let mut targets: Vec<&EegEpoch> = data.iter().filter(|e| e.label == Label::Target).collect();
    let mut nontargets: Vec<&EegEpoch> = data.iter().filter(|e| e.label == Label::NonTarget).collect();
    if targets.len() < 3 || nontargets.len() < 3 {
        return Err(Error::Training("both classes need at least three epochs".into()));
    }
    targets.shuffle(rng);
    nontargets.shuffle(rng);
    let hold_t = ((targets.len() as f64 * HOLDOUT_FRACTION).round() as usize).clamp(2, targets.len() - 1);
    let hold_n = ((nontargets.len() as f64 * HOLDOUT_FRACTION).round() as usize).clamp(2, nontargets.len() - 1);
    let (test_t, train_t) = targets.split_at(hold_t);
    let (test_n, train_n) = nontargets.split_at(hold_n);

    let n_feat = ne * len;
    let train: Vec<&EegEpoch> = train_t.iter().chain(train_n).copied().collect();
    let mut x = Vec::with_capacity(train.len() * n_feat);
    let mut y = Vec::with_capacity(train.len());
    for e in &train {
        x.extend_from_slice(&e.values);
        y.push(e.label.sign());
    }
    let fit = stepwise_regression(&x, &y, n_feat, params)?;
    let mut model = SwldaModel {
        n_electrodes: ne,
        window_len: len,
        selected: fit.selected.iter().map(|&k| (k / len, k % len)).collect(),
        weights: fit.coefficients,
        intercept: fit.intercept,
        calib_stats: CalibStats {
            target_mean: 0.0,
            target_var: 0.0,
            nontarget_mean: 0.0,
            nontarget_var: 0.0,
            n_target: 0,
            n_nontarget: 0,
        },
    };
    let ts: Vec<f64> = test_t.iter().map(|e| model.score(e)).collect::<Result<_>>()?;
    let ns: Vec<f64> = test_n.iter().map(|e| model.score(e)).collect::<Result<_>>()?;
    model.calib_stats = CalibStats::from_scores(&ts, &ns)?;
    Ok(model)
}
