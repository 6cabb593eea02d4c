use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::record::MeasurementRecord;

/// Parity estimate P_UU + P_DD − P_ONE with its projection-noise error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParityEstimate {
    pub value: f64,
    pub sigma: f64,
    pub n: u64,
}

pub fn parity_from_counts(counts: [u64; 3]) -> Result<ParityEstimate> {
    let n = counts.iter().sum::<u64>();
    if n == 0 {
        return Err(Error::InsufficientData("empty record".into()));
    }
    let value = (counts[0] as f64 + counts[1] as f64 - counts[2] as f64) / n as f64;
    Ok(ParityEstimate { value, sigma: ((1.0 - value * value).max(0.0) / n as f64).sqrt(), n })
}

/// Combines the records of one configuration, flipping the sign of the
/// φ_init = π cells, weighted by shot count.
pub fn estimate_parity(records: &[MeasurementRecord]) -> Result<ParityEstimate> {
    let n: u64 = records.iter().map(MeasurementRecord::n).sum();
    if n == 0 {
        return Err(Error::InsufficientData("empty record".into()));
    }
    let (mut sum, mut var) = (0.0, 0.0);
    for r in records.iter().filter(|r| r.n() > 0) {
        let e = parity_from_counts(r.counts())?;
        let w = r.n() as f64 / n as f64;
        sum += w * r.meta.init_sign.value() * e.value;
        var += w * w * e.sigma * e.sigma;
    }
    Ok(ParityEstimate { value: sum, sigma: var.sqrt(), n })
}

/// Standard deviation of [`estimate_parity`] over `resamples` parametric
/// bootstrap replicas (multinomial redraws of each record's counts).
pub fn bootstrap_sigma(records: &[MeasurementRecord], resamples: usize, seed: u64) -> Result<f64> {
    estimate_parity(records)?;
    if resamples < 2 {
        return Err(Error::invalid("resamples", "need at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let replica: Vec<MeasurementRecord> = records
            .iter()
            .map(|r| {
                let n = r.n();
                let mut copy = r.clone();
                if n > 0 {
                    let f = r.frequencies().expect("non-empty record");
                    let uu = Binomial::new(n, f[0]).expect("valid probability").sample(&mut rng);
                    let rest = 1.0 - f[0];
                    let p_dd = if rest > 0.0 { (f[1] / rest).min(1.0) } else { 0.0 };
                    let dd = Binomial::new(n - uu, p_dd).expect("valid probability").sample(&mut rng);
                    copy.n_uu = uu;
                    copy.n_dd = dd;
                    copy.n_one = n - uu - dd;
                }
                copy
            })
            .collect();
        values.push(estimate_parity(&replica)?.value);
    }
    let mean = values.iter().sum::<f64>() / resamples as f64;
    Ok((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt())
}
