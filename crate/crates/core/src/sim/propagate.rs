//! Exact piecewise-constant propagation of a two-spin pure state.
//!
//! Within each time slice the Hamiltonian is frozen. Its block structure gives
//! the propagator in closed form: pure phases on |↑↑⟩ and |↓↓⟩ and an SU(2)
//! rotation of the DFS pair {|↑↓⟩, |↓↑⟩}. Everything runs in the frame
//! rotating at the nominal Larmor frequency, so the collective Zeeman term is
//! just the field noise δB(t).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noise::NoiseRealization;
use crate::physics::{DD, DU, UD, UU};
use crate::sim::sequence::PulseAxis;
use crate::state::TwoSpinState;

/// Everything that sets H(t) during free evolution.
#[derive(Debug, Clone, Copy)]
pub struct Drive<'a> {
    /// Dipolar coupling ξ (rad/s).
    pub xi: f64,
    /// Ion separation (m); converts gradients into differential Zeeman shifts.
    pub separation: f64,
    /// gμ_B/ħ (rad·s⁻¹·T⁻¹).
    pub gyromagnetic: f64,
    pub noise: &'a NoiseRealization,
}

impl Drive<'_> {
    pub fn dt(&self) -> f64 {
        self.noise.dt()
    }

    /// Slice-length limit from the fastest DFS rotation on the trace.
    pub fn max_dt(&self) -> f64 {
        let grad = self.noise.grad().iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let rate = (self.gyromagnetic * grad * self.separation).abs() + 4.0 * self.xi.abs();
        if rate > 0.0 {
            1.0 / (10.0 * rate)
        } else {
            f64::INFINITY
        }
    }

    pub fn check_resolution(&self) -> Result<()> {
        let limit = self.max_dt();
        if self.dt() > limit {
            return Err(Error::Resolution { dt: self.dt(), limit });
        }
        Ok(())
    }
}

#[inline]
fn cis(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::new(c, s)
}

/// Advances `state` by one frozen slice of length `h`.
#[inline]
pub(crate) fn step(state: &mut TwoSpinState, xi: f64, omega_common: f64, delta: f64, h: f64) {
    let a = &mut state.0;
    // H/ħ diag: ↑↑ = ω_c + 2ξ, ↓↓ = −ω_c + 2ξ
    a[UU] *= cis(-(omega_common + 2.0 * xi) * h);
    a[DD] *= cis(-(-omega_common + 2.0 * xi) * h);
    // DFS block: −2ξ·𝟙 + (Δ/2)σz − 2ξσx
    let rate = delta.hypot(4.0 * xi);
    if rate == 0.0 {
        let g = cis(2.0 * xi * h);
        a[UD] *= g;
        a[DU] *= g;
        return;
    }
    let (s, c) = (0.5 * rate * h).sin_cos();
    let nx = -4.0 * xi / rate;
    let nz = delta / rate;
    let g = cis(2.0 * xi * h);
    let (u, d) = (a[UD], a[DU]);
    let i = Complex64::i();
    a[UD] = g * (Complex64::new(c, -s * nz) * u - i * (s * nx) * d);
    a[DU] = g * (-i * (s * nx) * u + Complex64::new(c, s * nz) * d);
}

/// Evolves `state` over `[t_start, t_start + duration)`, slice boundaries on the noise grid.
pub fn evolve_segment(state: &mut TwoSpinState, drive: &Drive<'_>, t_start: f64, duration: f64) -> Result<()> {
    if !(duration >= 0.0) {
        return Err(Error::invalid("duration", format!("must be non-negative, got {duration}")));
    }
    let dt = drive.dt();
    let t_end = t_start + duration;
    let mut t = t_start;
    while t_end - t > 1e-12 * dt.max(t_end) {
        let k = (t / dt + 1e-9).floor() as usize;
        let slice_end = ((k + 1) as f64 * dt).min(t_end);
        let (db, grad) = drive.noise.sample(k);
        let omega_common = drive.gyromagnetic * db;
        let delta = drive.gyromagnetic * grad * drive.separation;
        step(state, drive.xi, omega_common, delta, slice_end - t);
        t = slice_end;
    }
    Ok(())
}

/// Single-spin rotation exp(−iθ/2 (cos β σx + sin β σy)) as a 2×2 matrix.
pub fn spin_rotation(azimuth: f64, angle: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (0.5 * angle).sin_cos();
    let mi = Complex64::new(0.0, -1.0);
    [[Complex64::new(c, 0.0), mi * s * cis(-azimuth)], [mi * s * cis(azimuth), Complex64::new(c, 0.0)]]
}

/// Same rotation on both spins.
pub fn apply_collective_pulse(state: &mut TwoSpinState, axis: PulseAxis, angle: f64) {
    apply_collective_rotation(state, axis.azimuth(), angle);
}

pub fn apply_collective_rotation(state: &mut TwoSpinState, azimuth: f64, angle: f64) {
    let r = spin_rotation(azimuth, angle);
    let psi = state.0;
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..2 {
                for l in 0..2 {
                    acc += r[i][k] * r[j][l] * psi[2 * k + l];
                }
            }
            out[2 * i + j] = acc;
        }
    }
    state.0 = out;
}

/// |↑↓⟩ → e^{+iφ/2}|↑↓⟩, |↓↑⟩ → e^{−iφ/2}|↓↑⟩.
pub fn apply_differential_phase(state: &mut TwoSpinState, phi: f64) {
    state.0[UD] *= cis(0.5 * phi);
    state.0[DU] *= cis(-0.5 * phi);
}
