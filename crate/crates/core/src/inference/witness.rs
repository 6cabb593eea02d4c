//! Swap-operator entanglement witness and detection-corrected MLE.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instrument::ConfusionMatrix;
use crate::sim::record::MeasurementRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessEstimate {
    /// P_UU + P_DD − V from the raw counts.
    pub raw: f64,
    pub sigma: f64,
    pub mle_value: f64,
    pub mle_sigma: f64,
    /// The MLE populations touched the simplex boundary.
    pub boundary: bool,
}

/// ⟨S⟩ = P_UU + P_DD − V. Negative exactly when P_UU + P_DD < V.
pub fn swap_witness(p_sum: f64, p_sigma: f64, visibility: f64, v_sigma: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::invalid("visibility", format!("{visibility} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&p_sum) {
        return Err(Error::invalid("P_UU + P_DD", format!("{p_sum} outside [0, 1]")));
    }
    Ok((p_sum - visibility, p_sigma.hypot(v_sigma)))
}

/// Raw witness from a population-readout record and a parity visibility.
pub fn swap_witness_from_record(populations: &MeasurementRecord, visibility: f64, v_sigma: f64) -> Result<(f64, f64)> {
    let f = populations.frequencies()?;
    let p = f[0] + f[1];
    swap_witness(p, (p * (1.0 - p) / populations.n() as f64).sqrt(), visibility, v_sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleResult {
    /// True (UU, DD, ONE) probabilities.
    pub probabilities: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    pub boundary: bool,
    pub iterations: usize,
}

/// Maximum-likelihood true class probabilities for observed `counts` through
/// `confusion`, constrained to the simplex (expectation–maximization).
pub fn mle_correct(counts: [u64; 3], confusion: &ConfusionMatrix) -> Result<MleResult> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::InsufficientData("empty record".into()));
    }
    let c = &confusion.0;
    for j in 0..3 {
        let col: f64 = (0..3).map(|i| c[i][j]).sum();
        if (col - 1.0).abs() > 1e-9 || (0..3).any(|i| c[i][j] < 0.0) {
            return Err(Error::invalid("confusion matrix", format!("column {j} is not a distribution")));
        }
    }
    let m = Matrix3::from_fn(|i, j| c[i][j]);
    let inv = m
        .try_inverse()
        .filter(|_| m.determinant().abs() > 1e-12)
        .ok_or_else(|| Error::invalid("confusion matrix", "singular"))?;
    let q = counts.map(|k| k as f64 / n as f64);
    let mut p = [1.0 / 3.0; 3];
    let mut iterations = 0;
    for it in 1..=200_000 {
        iterations = it;
        let pred = confusion.apply(&p);
        let mut next = [0.0; 3];
        for (j, nj) in next.iter_mut().enumerate() {
            let s: f64 = (0..3).filter(|&i| pred[i] > 0.0).map(|i| q[i] * c[i][j] / pred[i]).sum();
            *nj = p[j] * s;
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if change < 1e-14 {
            break;
        }
    }
    // delta-method covariance of the unconstrained inverse C⁻¹q
    let sq = Matrix3::from_fn(|i, j| (if i == j { q[i] } else { 0.0 } - q[i] * q[j]) / n as f64);
    let cov = inv * sq * inv.transpose();
    let covariance = [0, 1, 2].map(|i| [0, 1, 2].map(|j| cov[(i, j)]));
    let boundary = p.iter().any(|&v| v < 1e-6);
    Ok(MleResult { probabilities: p, covariance, boundary, iterations })
}

/// Raw and corrected witness: populations corrected by MLE, parity contrast by 1/α.
pub fn witness_estimate(
    populations: &MeasurementRecord,
    visibility: f64,
    v_sigma: f64,
    confusion: &ConfusionMatrix,
    alpha: f64,
) -> Result<WitnessEstimate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} outside (0, 1]")));
    }
    let (raw, sigma) = swap_witness_from_record(populations, visibility, v_sigma)?;
    let mle = mle_correct(populations.counts(), confusion)?;
    let p = mle.probabilities[0] + mle.probabilities[1];
    let c = &mle.covariance;
    let p_var = (c[0][0] + c[1][1] + 2.0 * c[0][1]).max(0.0);
    let v = visibility / alpha;
    Ok(WitnessEstimate {
        raw,
        sigma,
        mle_value: p - v,
        mle_sigma: (p_var + (v_sigma / alpha).powi(2)).sqrt(),
        boundary: mle.boundary,
    })
}
