//! Overlapping Allan deviation of per-shot series.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::fit::{fit_power_law, FitResult};
use crate::instrument::DetectionOutcome;
use crate::sim::sequence::Sign;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdevPoint {
    /// Averaging length in shots.
    pub tau: usize,
    pub adev: f64,
    /// Number of overlapping second differences.
    pub terms: usize,
}

/// Parity contribution of each shot, sign-flipped for φ_init = π shots.
pub fn parity_series(shots: &[(Sign, DetectionOutcome)]) -> Vec<f64> {
    shots.iter().map(|(s, o)| s.value() * o.parity_sign()).collect()
}

/// Roughly `per_decade` log-spaced averaging lengths from 1 to `max`.
pub fn log_tau_grid(max: usize, per_decade: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    if max == 0 || per_decade == 0 {
        return out;
    }
    let steps = ((max as f64).log10() * per_decade as f64).floor() as usize;
    for k in 0..=steps {
        let t = 10f64.powf(k as f64 / per_decade as f64).round() as usize;
        if t <= max && out.last() != Some(&t) {
            out.push(t);
        }
    }
    out
}

/// σ²(m) = Σ (x_{i+2m} − 2x_{i+m} + x_i)² / (2m²(M − 2m)) on the cumulative
/// sum x (M = N + 1 points) of the series.
pub fn allan_deviation(series: &[f64], taus: &[usize]) -> Result<Vec<AdevPoint>> {
    let mut x = Vec::with_capacity(series.len() + 1);
    x.push(0.0);
    let mut acc = 0.0;
    for v in series {
        acc += v;
        x.push(acc);
    }
    let m_points = x.len();
    taus.iter()
        .map(|&m| {
            if m == 0 {
                return Err(Error::invalid("tau", "averaging length must be at least 1"));
            }
            if series.len() < 2 * m {
                return Err(Error::InsufficientData(format!("tau = {m} needs at least {} shots, have {}", 2 * m, series.len())));
            }
            let terms = m_points - 2 * m;
            let s: f64 = (0..terms).map(|i| (x[i + 2 * m] - 2.0 * x[i + m] + x[i]).powi(2)).sum();
            let var = s / (2.0 * (m * m) as f64 * terms as f64);
            Ok(AdevPoint { tau: m, adev: var.sqrt(), terms })
        })
        .collect()
}

/// Log-log slope of an ADEV curve; `slope` is d log σ / d log τ.
pub fn adev_slope(points: &[AdevPoint]) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.tau as f64, p.adev)).collect();
    let mut f = fit_power_law(&pts, None)?;
    let n = f.parameters.iter_mut().find(|p| p.name == "n").expect("power-law exponent");
    n.name = "slope".into();
    n.value = -n.value;
    Ok(f)
}
