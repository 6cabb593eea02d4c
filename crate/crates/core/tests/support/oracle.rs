//! Density-matrix reference model. Builds the Hamiltonian from Pauli
//! products, propagates ρ with a generic matrix exponential over the same
//! noise realizations the Monte-Carlo engine draws, and pushes the final
//! populations through an explicitly enumerated per-spin readout.

#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C;

use dipolar::noise::NoiseRealization;
use dipolar::physics::CODATA;
use dipolar::sim::engine::{shot_noise, ShotConfig, ShotRngs};
use dipolar::sim::record::MeasurementRecord;
use dipolar::sim::sequence::{PrepTarget, PulseSequence, Segment, Sign};

pub type M4 = Matrix4<C>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn pauli() -> [Matrix2<C>; 4] {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        Matrix2::new(l, o, o, l),
        Matrix2::new(o, l, l, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(l, o, o, -l),
    ]
}

pub fn kron(a: &Matrix2<C>, b: &Matrix2<C>) -> M4 {
    M4::from_fn(|r, s| a[(r / 2, s / 2)] * b[(r % 2, s % 2)])
}

/// H/ħ = ω₁σz⊗1/2 + ω₂ 1⊗σz/2 + 2ξ σz⊗σz − ξ(σx⊗σx + σy⊗σy).
pub fn hamiltonian(w1: f64, w2: f64, xi: f64) -> M4 {
    let [id, x, y, z] = pauli();
    kron(&z, &id) * c(w1 / 2.0, 0.0) + kron(&id, &z) * c(w2 / 2.0, 0.0) + kron(&z, &z) * c(2.0 * xi, 0.0)
        - (kron(&x, &x) + kron(&y, &y)) * c(xi, 0.0)
}

pub fn expm_i(h: &M4, t: f64) -> M4 {
    (h * c(0.0, -t)).exp()
}

fn conj(u: &M4, rho: &M4) -> M4 {
    u * rho * u.adjoint()
}

/// Collective rotation by `angle` about the equatorial axis at `azimuth`.
pub fn collective_rotation(azimuth: f64, angle: f64) -> M4 {
    let [_, x, y, _] = pauli();
    let gen = x * c(azimuth.cos(), 0.0) + y * c(azimuth.sin(), 0.0);
    let r = (gen * c(0.0, -angle / 2.0)).exp();
    kron(&r, &r)
}

/// exp(iφ(σz⊗1 − 1⊗σz)/4): phase +φ/2 on ↑↓ and −φ/2 on ↓↑.
pub fn differential_phase(phi: f64) -> M4 {
    let [id, _, _, z] = pauli();
    ((kron(&z, &id) - kron(&id, &z)) * c(0.0, phi / 4.0)).exp()
}

/// Initial ensemble of a prepared state; `Minus` exchanges the spins of a product target.
pub fn initial_rho(target: PrepTarget, sign: Sign, prep_fidelity: f64) -> M4 {
    match target {
        PrepTarget::Product(s) => {
            let (mut a, mut b) = s.spins();
            if sign == Sign::Minus {
                std::mem::swap(&mut a, &mut b);
            }
            let f = prep_fidelity;
            let spin = |up: bool| {
                let p_up = if up { f } else { 1.0 - f };
                Matrix2::new(c(p_up, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0 - p_up, 0.0))
            };
            kron(&spin(a), &spin(b))
        }
        PrepTarget::Entangled { fidelity } => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let psi = nalgebra::Vector4::new(c(0.0, 0.0), c(s, 0.0), c(s, 0.0), c(0.0, 0.0));
            psi * psi.adjoint() * c(fidelity, 0.0) + M4::identity() * c((1.0 - fidelity) / 4.0, 0.0)
        }
    }
}

/// Free evolution over [t0, t0 + duration] with the noise held piecewise
/// constant on the realization's grid.
pub fn evolve(rho: &mut M4, cfg: &ShotConfig, noise: &NoiseRealization, t0: f64, duration: f64) {
    let gamma = CODATA.gyromagnetic();
    let dt = noise.dt();
    let t_end = t0 + duration;
    let mut t = t0;
    while t < t_end - 1e-12 * t_end.max(1.0) {
        let k = ((t / dt) + 1e-9).floor() as usize;
        let edge = ((k + 1) as f64 * dt).min(t_end);
        let h = edge - t;
        let k = k.min(noise.len() - 1);
        let common = gamma * noise.delta_b()[k];
        let delta = gamma * noise.grad()[k] * cfg.separation;
        let u = expm_i(&hamiltonian(common + delta / 2.0, common - delta / 2.0, cfg.xi), h);
        *rho = conj(&u, rho);
        t = edge;
    }
}

/// ρ just before detection for one noise trace.
pub fn final_rho(cfg: &ShotConfig, seq: &PulseSequence, noise: &NoiseRealization) -> M4 {
    assert_eq!(cfg.instrument.pulse_error, 0.0, "oracle models ideal pulses");
    let (target, sign) = seq.prep();
    let mut rho = initial_rho(target, sign, cfg.instrument.prep_fidelity);
    for ts in seq.segments() {
        match ts.segment {
            Segment::FreeEvolve { duration } => evolve(&mut rho, cfg, noise, ts.start, duration),
            Segment::CollectivePulse { axis, angle } => rho = conj(&collective_rotation(axis.azimuth(), angle), &rho),
            Segment::DifferentialPhase { phi } => rho = conj(&differential_phase(phi), &rho),
            Segment::Prepare { .. } | Segment::Measure => {}
        }
    }
    rho
}

/// Observed (UU, DD, ONE) probabilities for basis populations, enumerating
/// both spins' readouts.
pub fn readout(pop: [f64; 4], d_up: f64, d_down: f64) -> [f64; 3] {
    let d_up = d_up.clamp(0.0, 1.0);
    let d_down = d_down.clamp(0.0, 1.0);
    let bright = |up: bool| if up { d_up } else { 1.0 - d_down };
    let mut out = [0.0; 3];
    for (idx, p) in pop.iter().enumerate() {
        let (a, b) = (idx & 2 == 0, idx & 1 == 0);
        for ra in [true, false] {
            for rb in [true, false] {
                let pa = if ra { bright(a) } else { 1.0 - bright(a) };
                let pb = if rb { bright(b) } else { 1.0 - bright(b) };
                let class = match (ra, rb) {
                    (true, true) => 0,
                    (false, false) => 1,
                    _ => 2,
                };
                out[class] += p * pa * pb;
            }
        }
    }
    out
}

pub fn populations(rho: &M4) -> [f64; 4] {
    [0, 1, 2, 3].map(|i| rho[(i, i)].re)
}

/// Expected counts and their Poisson-binomial variance per sign.
#[derive(Debug, Clone, Copy)]
pub struct Expected {
    pub sign: Sign,
    pub n: u64,
    pub mean: [f64; 3],
    pub var: [f64; 3],
}

/// Oracle for the shots `run_experiment(cfg, seq, shots, interleave, seed, cell)` draws.
pub fn expected_counts(cfg: &ShotConfig, seq: &PulseSequence, shots: u64, interleave: bool, seed: u64, cell: u64) -> Vec<Expected> {
    let base = seq.prep().1;
    let signs: Vec<Sign> = if interleave { vec![Sign::Plus, Sign::Minus] } else { vec![base] };
    let variants: Vec<PulseSequence> = signs.iter().map(|&s| seq.with_init_sign(s)).collect();
    let mut out: Vec<Expected> = signs.iter().map(|&sign| Expected { sign, n: 0, mean: [0.0; 3], var: [0.0; 3] }).collect();
    let (d_up, d_down) = cfg.instrument.fidelities(cfg.detection_coordinate);
    for shot in 0..shots {
        let k = (shot % signs.len() as u64) as usize;
        let mut rngs = ShotRngs::new(seed, cell, shot);
        let noise = shot_noise(cfg, variants[k].duration(), &mut rngs.noise).expect("noise");
        let rho = final_rho(cfg, &variants[k], &noise);
        let p = readout(populations(&rho), d_up, d_down);
        let e = &mut out[k];
        e.n += 1;
        for j in 0..3 {
            e.mean[j] += p[j];
            e.var[j] += p[j] * (1.0 - p[j]);
        }
    }
    out
}

/// Largest |observed − expected|/σ over classes and signs.
pub fn max_z(records: &[MeasurementRecord], expected: &[Expected]) -> f64 {
    let mut worst = 0.0f64;
    for e in expected {
        let r = records.iter().find(|r| r.meta.init_sign == e.sign).expect("record for sign");
        assert_eq!(r.n(), e.n);
        for (j, &obs) in r.counts().iter().enumerate() {
            let diff = obs as f64 - e.mean[j];
            let z = if e.var[j] > 0.0 { diff.abs() / e.var[j].sqrt() } else if diff.abs() < 1e-9 { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
        }
    }
    worst
}
