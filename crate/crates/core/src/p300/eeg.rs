//! Simulated multi-electrode EEG epochs.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Added to the kernel diagonal before factorization so wide bandwidths stay
/// numerically positive definite.
const KERNEL_NUGGET: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EegConfig {
    pub n_electrodes: usize,
    /// Samples per epoch.
    pub window_len: usize,
    /// Marginal noise variance at every electrode and time index.
    pub noise_var: f64,
    /// Bandwidth of the Gaussian spatial kernel, in grid units.
    pub kernel_bandwidth: f64,
    /// Lag-one temporal autocorrelation of the noise.
    pub ar_coef: f64,
    /// Target peak relative to the non-target level.
    pub amplitude_ratio: f64,
    pub nontarget_amp: f64,
}

impl Default for EegConfig {
    fn default() -> Self {
        Self {
            n_electrodes: 16,
            window_len: 25,
            noise_var: 1.0,
            kernel_bandwidth: 1.0,
            ar_coef: 0.9,
            amplitude_ratio: 5.0,
            nontarget_amp: 1.0,
        }
    }
}

impl EegConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_electrodes == 0 {
            return Err(Error::invalid("n_electrodes", "must be at least 1"));
        }
        if self.window_len == 0 {
            return Err(Error::invalid("window_len", "must be at least 1"));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::invalid(
                "sigma_eeg",
                "noise variance must be finite and non-negative",
            ));
        }
        if !(self.kernel_bandwidth > 0.0 && self.kernel_bandwidth.is_finite()) {
            return Err(Error::invalid("kernel_bandwidth", "must be positive"));
        }
        if !(self.ar_coef.abs() < 1.0) {
            return Err(Error::invalid("ar_coef", "must lie in (-1, 1)"));
        }
        if !(self.amplitude_ratio > 0.0 && self.nontarget_amp > 0.0) {
            return Err(Error::invalid("amplitude_ratio", "amplitudes must be positive"));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.n_electrodes * self.window_len
    }

    /// Sample index of the target peak, 60% into the window.
    pub fn peak_index(&self) -> usize {
        ((0.6 * self.window_len as f64).floor() as usize).min(self.window_len - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Target,
    NonTarget,
}

impl Label {
    /// +1 for targets, -1 otherwise.
    pub fn sign(self) -> f64 {
        match self {
            Label::Target => 1.0,
            Label::NonTarget => -1.0,
        }
    }
}

/// One epoch, stored electrode-major: `values[e * window_len + s]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EegEpoch {
    pub values: Vec<f64>,
    pub n_electrodes: usize,
    pub window_len: usize,
    pub label: Label,
}

impl EegEpoch {
    pub fn get(&self, electrode: usize, sample: usize) -> f64 {
        self.values[electrode * self.window_len + sample]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_electrodes, self.window_len, &self.values)
    }
}

/// Electrode coordinates on a square grid with unit spacing, filled row by row.
pub fn electrode_positions(n: usize) -> Vec<(f64, f64)> {
    let side = (n as f64).sqrt().ceil().max(1.0) as usize;
    (0..n).map(|i| ((i % side) as f64, (i / side) as f64)).collect()
}

/// Spatial correlation matrix `exp(-d^2 / (2 h^2))`, unit diagonal.
pub fn spatial_kernel(n_electrodes: usize, bandwidth: f64) -> DMatrix<f64> {
    let pos = electrode_positions(n_electrodes);
    let scale = 1.0 / (1.0 + KERNEL_NUGGET);
    DMatrix::from_fn(n_electrodes, n_electrodes, |i, j| {
        let d2 = (pos[i].0 - pos[j].0).powi(2) + (pos[i].1 - pos[j].1).powi(2);
        let k = (-d2 / (2.0 * bandwidth * bandwidth)).exp();
        if i == j {
            1.0
        } else {
            k * scale
        }
    })
}

/// Generates epochs as template plus spatially and temporally correlated noise.
#[derive(Clone, Debug)]
pub struct EegSimulator {
    cfg: EegConfig,
    chol: DMatrix<f64>,
    target: Vec<f64>,
    nontarget: Vec<f64>,
}

impl EegSimulator {
    pub fn new(cfg: EegConfig) -> Result<Self> {
        cfg.validate()?;
        let kernel = spatial_kernel(cfg.n_electrodes, cfg.kernel_bandwidth);
        let chol = kernel
            .cholesky()
            .ok_or_else(|| Error::invalid("kernel_bandwidth", "spatial kernel is not positive definite"))?
            .l();
        let target = template(&cfg, Label::Target);
        let nontarget = template(&cfg, Label::NonTarget);
        Ok(Self {
            cfg,
            chol,
            target,
            nontarget,
        })
    }

    pub fn config(&self) -> &EegConfig {
        &self.cfg
    }

    pub fn template(&self, label: Label) -> &[f64] {
        match label {
            Label::Target => &self.target,
            Label::NonTarget => &self.nontarget,
        }
    }

    pub fn generate_epoch<R: Rng + ?Sized>(&self, label: Label, rng: &mut R) -> EegEpoch {
        let mut values = vec![0.0; self.cfg.n_features()];
        self.generate_into(label, rng, &mut values);
        EegEpoch {
            values,
            n_electrodes: self.cfg.n_electrodes,
            window_len: self.cfg.window_len,
            label,
        }
    }

    /// Writes one epoch into `out` (electrode-major).
    pub fn generate_into<R: Rng + ?Sized>(&self, label: Label, rng: &mut R, out: &mut [f64]) {
        let (ne, len) = (self.cfg.n_electrodes, self.cfg.window_len);
        out.copy_from_slice(self.template(label));
        if self.cfg.noise_var == 0.0 {
            return;
        }
        let sd = self.cfg.noise_var.sqrt();
        let rho = self.cfg.ar_coef;
        let innov = (1.0 - rho * rho).sqrt();
        let mut eps = DVector::<f64>::zeros(ne);
        let mut z = DVector::<f64>::zeros(ne);
        let mut state = vec![0.0; ne];
        for s in 0..len {
            for e in eps.iter_mut() {
                *e = rng.sample(StandardNormal);
            }
            z.gemv(1.0, &self.chol, &eps, 0.0);
            for e in 0..ne {
                state[e] = if s == 0 { z[e] } else { rho * state[e] + innov * z[e] };
                out[e * len + s] += sd * state[e];
            }
        }
    }

    /// `n_target` target and `n_nontarget` non-target epochs in random order.
    pub fn generate_calibration<R: Rng + ?Sized>(
        &self,
        n_target: usize,
        n_nontarget: usize,
        rng: &mut R,
    ) -> Result<Vec<EegEpoch>> {
        if n_target == 0 || n_nontarget == 0 {
            return Err(Error::invalid("calib_targets", "both classes need at least one epoch"));
        }
        let mut labels: Vec<Label> = std::iter::repeat_n(Label::Target, n_target)
            .chain(std::iter::repeat_n(Label::NonTarget, n_nontarget))
            .collect();
        labels.shuffle(rng);
        Ok(labels.into_iter().map(|l| self.generate_epoch(l, rng)).collect())
    }
}

/// Noise-free waveform: a flat non-target level, plus for targets a Gaussian
/// bump peaking at `amplitude_ratio * nontarget_amp`.
fn template(cfg: &EegConfig, label: Label) -> Vec<f64> {
    let len = cfg.window_len;
    let peak = cfg.peak_index() as f64;
    let width = (len as f64 / 10.0).max(0.5);
    let wave: Vec<f64> = (0..len)
        .map(|s| match label {
            Label::NonTarget => cfg.nontarget_amp,
            Label::Target => {
                let g = (-(s as f64 - peak).powi(2) / (2.0 * width * width)).exp();
                cfg.nontarget_amp * (1.0 + (cfg.amplitude_ratio - 1.0) * g)
            }
        })
        .collect();
    (0..cfg.n_electrodes).flat_map(|_| wave.iter().copied()).collect()
}
