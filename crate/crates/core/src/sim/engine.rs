//! Monte-Carlo shot engine: prepare, evolve under a fresh noise trace,
//! analyze and detect.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instrument::{self, DetectionOutcome, InstrumentModel};
use crate::noise::{sample_noise, NoiseConfig, NoiseRealization};
use crate::physics::CODATA;
use crate::sim::propagate::{apply_collective_pulse, apply_differential_phase, evolve_segment, Drive};
use crate::sim::record::{MeasurementRecord, Readout, RecordMeta};
use crate::sim::sequence::{PrepTarget, PulseSequence, Segment, Sign};
use crate::state::TwoSpinState;

/// Physical and instrumental parameters shared by all shots of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotConfig {
    /// Dipolar coupling ξ (rad/s).
    pub xi: f64,
    /// Ion separation (m).
    pub separation: f64,
    pub noise: NoiseConfig,
    pub instrument: InstrumentModel,
    /// Coordinate at which the detection curves are evaluated (s or µm).
    pub detection_coordinate: f64,
    /// Propagation slice (s).
    pub dt: f64,
}

impl ShotConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.separation > 0.0) {
            return Err(Error::invalid("separation", format!("must be positive, got {}", self.separation)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !self.xi.is_finite() {
            return Err(Error::invalid("xi", "non-finite"));
        }
        self.noise.validate()?;
        self.instrument.validate()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream` in cell `cell` under `master`.
pub fn derive_seed(master: u64, cell: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell) ^ stream)
}

/// Independent random streams of one shot.
#[derive(Debug, Clone)]
pub struct ShotRngs {
    pub prep: ChaCha8Rng,
    pub noise: ChaCha8Rng,
    pub pulse: ChaCha8Rng,
    pub detect: ChaCha8Rng,
}

impl ShotRngs {
    pub fn new(master: u64, cell: u64, shot: u64) -> Self {
        let s = |j: u64| ChaCha8Rng::seed_from_u64(derive_seed(master, cell, shot * 4 + j));
        Self { prep: s(0), noise: s(1), pulse: s(2), detect: s(3) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotResult {
    pub outcome: DetectionOutcome,
    /// State just before detection.
    pub final_state: TwoSpinState,
}

impl ShotResult {
    pub fn dfs_bloch(&self) -> [f64; 3] {
        self.final_state.dfs_bloch()
    }
}

/// Noise trace covering the sequence, as drawn by [`run_shot`] from `rng`.
pub fn shot_noise<R: Rng + ?Sized>(cfg: &ShotConfig, duration: f64, rng: &mut R) -> Result<NoiseRealization> {
    sample_noise(&cfg.noise, duration.max(cfg.dt), cfg.dt, rng)
}

/// Initial pure state; `Sign::Minus` exchanges the spins of a product target.
pub fn prepare<R: Rng + ?Sized>(target: PrepTarget, sign: Sign, model: &InstrumentModel, rng: &mut R) -> TwoSpinState {
    match target {
        PrepTarget::Product(s) => {
            let s = if sign == Sign::Minus { s.swapped() } else { s };
            instrument::prepare_state(s, model, rng)
        }
        PrepTarget::Entangled { fidelity } => instrument::sample_entangled(fidelity, rng),
    }
}

/// Coherent part of one shot: the state just before detection for a given noise trace.
pub fn propagate_sequence<R: Rng + ?Sized>(
    cfg: &ShotConfig,
    seq: &PulseSequence,
    initial: TwoSpinState,
    noise: &NoiseRealization,
    pulse_rng: &mut R,
) -> Result<TwoSpinState> {
    let drive = Drive { xi: cfg.xi, separation: cfg.separation, gyromagnetic: CODATA.gyromagnetic(), noise };
    drive.check_resolution()?;
    let mut state = initial;
    for ts in seq.segments() {
        match ts.segment {
            Segment::Prepare { .. } | Segment::Measure => {}
            Segment::FreeEvolve { duration } => evolve_segment(&mut state, &drive, ts.start, duration)?,
            Segment::CollectivePulse { axis, angle } => {
                let err = cfg.instrument.pulse_error;
                let angle = if err > 0.0 { angle + err * pulse_rng.sample::<f64, _>(StandardNormal) } else { angle };
                apply_collective_pulse(&mut state, axis, angle);
            }
            Segment::DifferentialPhase { phi } => apply_differential_phase(&mut state, phi),
        }
    }
    Ok(state)
}

pub fn run_shot(cfg: &ShotConfig, seq: &PulseSequence, rngs: &mut ShotRngs) -> Result<ShotResult> {
    let (target, sign) = seq.prep();
    let initial = prepare(target, sign, &cfg.instrument, &mut rngs.prep);
    let noise = shot_noise(cfg, seq.duration(), &mut rngs.noise)?;
    let state = propagate_sequence(cfg, seq, initial, &noise, &mut rngs.pulse)?;
    let mut probs = state.probabilities();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let outcome = instrument::detect(&probs, &cfg.instrument, cfg.detection_coordinate, &mut rngs.detect)?;
    Ok(ShotResult { outcome, final_state: state })
}

/// Shots `first..first + n` of `cell`, in shot order.
pub fn run_shots(
    cfg: &ShotConfig,
    seq: &PulseSequence,
    master_seed: u64,
    cell: u64,
    first: u64,
    n: u64,
) -> Result<Vec<ShotResult>> {
    cfg.validate()?;
    (first..first + n)
        .into_par_iter()
        .map(|shot| run_shot(cfg, seq, &mut ShotRngs::new(master_seed, cell, shot)))
        .collect()
}

/// Runs `n` shots of one cell, alternating the initial-phase sign shot by
/// shot when `interleave` is set. Returns one record per sign that ran
/// (Plus first) and the chronological outcome series.
pub fn run_experiment(
    cfg: &ShotConfig,
    seq: &PulseSequence,
    n: u64,
    interleave: bool,
    master_seed: u64,
    cell: u64,
) -> Result<(Vec<MeasurementRecord>, Vec<(Sign, DetectionOutcome)>)> {
    if n == 0 {
        return Err(Error::invalid("shots", "need at least one shot"));
    }
    cfg.validate()?;
    let base = seq.prep().1;
    let signs: &[Sign] = if interleave { &[Sign::Plus, Sign::Minus] } else { std::slice::from_ref(&base) };
    let variants: Vec<PulseSequence> = signs.iter().map(|&s| seq.with_init_sign(s)).collect();
    let series: Vec<(Sign, DetectionOutcome)> = (0..n)
        .into_par_iter()
        .map(|shot| {
            let k = (shot % signs.len() as u64) as usize;
            let r = run_shot(cfg, &variants[k], &mut ShotRngs::new(master_seed, cell, shot))?;
            Ok((signs[k], r.outcome))
        })
        .collect::<Result<_>>()?;
    let meta = |sign: Sign| RecordMeta {
        t: seq.duration(),
        d: cfg.separation,
        phi_parity: phase_of(seq),
        init: seq.prep().0.label(),
        init_sign: sign,
        readout: readout_of(seq),
    };
    let mut records: Vec<MeasurementRecord> = signs.iter().map(|&s| MeasurementRecord::empty(meta(s))).collect();
    for (sign, outcome) in &series {
        let k = signs.iter().position(|s| s == sign).expect("sign from list");
        records[k].add(*outcome);
    }
    records.retain(|r| r.n() > 0);
    Ok((records, series))
}

fn phase_of(seq: &PulseSequence) -> f64 {
    seq.segments()
        .iter()
        .find_map(|s| match s.segment {
            Segment::DifferentialPhase { phi } => Some(phi),
            _ => None,
        })
        .unwrap_or(0.0)
}

fn readout_of(seq: &PulseSequence) -> Readout {
    let analyzed = seq.segments().iter().any(|s| matches!(s.segment, Segment::DifferentialPhase { .. }));
    if analyzed {
        Readout::Parity
    } else {
        Readout::Population
    }
}
