//! Magnetic environment: collective field noise and gradient noise as
//! stationary Ornstein–Uhlenbeck processes sampled on a uniform grid.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// RMS of the spatially uniform field offset (T).
    pub collective_rms: f64,
    /// Correlation time of the collective noise (s).
    pub collective_corr_time: f64,
    /// Mean field gradient (T/m).
    pub grad_static: f64,
    /// RMS of gradient fluctuations around the mean (T/m).
    pub grad_rms: f64,
    /// Correlation time of the gradient noise (s).
    pub grad_corr_time: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            collective_rms: 0.0,
            collective_corr_time: 10e-3,
            grad_static: 0.0,
            grad_rms: 0.0,
            grad_corr_time: 10e-3,
        }
    }
}

impl NoiseConfig {
    pub fn quiet() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.collective_rms >= 0.0 && self.grad_rms >= 0.0) {
            return Err(Error::invalid("noise", "RMS amplitudes must be non-negative"));
        }
        if !(self.collective_corr_time > 0.0 && self.grad_corr_time > 0.0) {
            return Err(Error::invalid("noise", "correlation times must be positive"));
        }
        Ok(())
    }

    /// Largest step that resolves every active noise process.
    pub fn max_dt(&self) -> f64 {
        let mut limit = f64::INFINITY;
        if self.collective_rms > 0.0 {
            limit = limit.min(self.collective_corr_time / 5.0);
        }
        if self.grad_rms > 0.0 {
            limit = limit.min(self.grad_corr_time / 5.0);
        }
        limit
    }
}

/// One sampled environment trace. Sample `k` holds on `[k·dt, (k+1)·dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    dt: f64,
    delta_b: Vec<f64>,
    grad: Vec<f64>,
}

impl NoiseRealization {
    /// Noise-free trace with a constant gradient.
    pub fn constant(duration: f64, dt: f64, grad: f64) -> Self {
        let n = slice_count(duration, dt) + 1;
        Self { dt, delta_b: vec![0.0; n], grad: vec![grad; n] }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.delta_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_b.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| k as f64 * self.dt)
    }

    pub fn delta_b(&self) -> &[f64] {
        &self.delta_b
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    /// (δB, gradient) on slice `k`, clamped to the last sample.
    #[inline]
    pub fn sample(&self, k: usize) -> (f64, f64) {
        let k = k.min(self.delta_b.len() - 1);
        (self.delta_b[k], self.grad[k])
    }
}

pub(crate) fn slice_count(duration: f64, dt: f64) -> usize {
    (duration / dt - 1e-9).ceil().max(0.0) as usize
}

/// Samples both processes over `[0, duration]`, stationary from t = 0.
pub fn sample_noise<R: Rng + ?Sized>(
    cfg: &NoiseConfig,
    duration: f64,
    dt: f64,
    rng: &mut R,
) -> Result<NoiseRealization> {
    cfg.validate()?;
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(duration >= dt) {
        return Err(Error::invalid("duration", format!("{duration} s is shorter than one step {dt} s")));
    }
    let limit = cfg.max_dt();
    if dt > limit {
        return Err(Error::Resolution { dt, limit });
    }
    let n = slice_count(duration, dt) + 1;
    let delta_b = ou_trace(0.0, cfg.collective_rms, cfg.collective_corr_time, dt, n, rng);
    let grad = ou_trace(cfg.grad_static, cfg.grad_rms, cfg.grad_corr_time, dt, n, rng);
    Ok(NoiseRealization { dt, delta_b, grad })
}

/// Exact OU discretization: x' = μ + (x − μ)e^{−dt/τ} + σ√(1 − e^{−2dt/τ})·N(0,1).
fn ou_trace<R: Rng + ?Sized>(mean: f64, rms: f64, tau: f64, dt: f64, n: usize, rng: &mut R) -> Vec<f64> {
    if rms == 0.0 {
        return vec![mean; n];
    }
    let decay = (-dt / tau).exp();
    let kick = rms * (1.0 - decay * decay).sqrt();
    let mut x: f64 = rms * rng.sample::<f64, _>(StandardNormal);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(mean + x);
        x = x * decay + kick * rng.sample::<f64, _>(StandardNormal);
    }
    out
}
