//! Closed-form two-spin physics: constants, trap geometry, Zeeman and dipolar
//! rates, the full two-spin Hamiltonian and its reduction to the
//! decoherence-free subspace (DFS) spanned by |↑↓⟩ and |↓↑⟩.
//!
//! Rates are angular frequencies (rad/s) internally. Helpers ending in `_hz`
//! divide by 2π for reporting.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// CODATA 2018 values plus the ⁸⁸Sr⁺ ion mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Vacuum permeability (T·m/A).
    pub mu0: f64,
    /// Bohr magneton (J/T).
    pub mu_b: f64,
    /// Electron g-factor magnitude.
    pub g: f64,
    /// Reduced Planck constant (J·s).
    pub hbar: f64,
    /// Planck constant (J·s), stored as 2π·ħ.
    pub h: f64,
    /// Coulomb constant (N·m²/C²).
    pub ke: f64,
    /// Elementary charge (C).
    pub e: f64,
    /// Ion mass (kg).
    pub mass: f64,
}

/// Atomic mass constant (kg), CODATA 2018.
const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// ⁸⁸Sr mass in atomic mass units.
const SR88_MASS_U: f64 = 87.905_612;
const HBAR: f64 = 1.054_571_817e-34;

pub const CODATA: PhysicalConstants = PhysicalConstants {
    mu0: 1.256_637_062_12e-6,
    mu_b: 9.274_010_078_3e-24,
    g: 2.002_319_304_362_56,
    hbar: HBAR,
    h: 2.0 * PI * HBAR,
    ke: 8.987_551_792_3e9,
    e: 1.602_176_634e-19,
    mass: SR88_MASS_U * ATOMIC_MASS_UNIT,
};

impl PhysicalConstants {
    /// Spin gyromagnetic ratio gμ_B/ħ (rad·s⁻¹·T⁻¹) under the splitting convention.
    pub fn gyromagnetic(&self) -> f64 {
        self.g * self.mu_b / self.hbar
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA
    }
}

/// Two-ion geometry. Either the separation or the axial trap frequency may be
/// given; the other is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    separation: f64,
}

impl Geometry {
    pub fn from_separation(d: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid("separation", format!("must be positive, got {d}")));
        }
        Ok(Self { separation: d })
    }

    pub fn from_trap_frequency(f_trap: f64) -> Result<Self> {
        Ok(Self { separation: ion_separation(f_trap)? })
    }

    /// Inter-ion distance (m).
    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// Axial trap frequency (Hz) that produces this separation.
    pub fn trap_frequency(&self) -> f64 {
        trap_frequency_for(self.separation)
    }
}

/// Static field along the trap axis and its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConfig {
    /// Field magnitude (T).
    pub b0: f64,
    /// Field gradient along the axis (T/m).
    pub grad: f64,
}

impl FieldConfig {
    pub fn new(b0: f64, grad: f64) -> Result<Self> {
        if !(b0 >= 0.0) {
            return Err(Error::invalid("b0", format!("must be non-negative, got {b0}")));
        }
        Ok(Self { b0, grad })
    }
}

/// Dipolar coupling ξ = μ₀(gμ_B/2)²/(4πħd³) in rad/s.
pub fn coupling_strength(d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid("separation", format!("must be positive, got {d}")));
    }
    let c = &CODATA;
    let moment = c.g * c.mu_b / 2.0;
    Ok(c.mu0 * moment * moment / (4.0 * PI * c.hbar * d.powi(3)))
}

/// ξ/2π in Hz.
pub fn coupling_strength_hz(d: f64) -> Result<f64> {
    Ok(coupling_strength(d)? / (2.0 * PI))
}

/// Equilibrium spacing of two ions in a harmonic trap of axial frequency `f_trap` (Hz).
pub fn ion_separation(f_trap: f64) -> Result<f64> {
    if !(f_trap > 0.0 && f_trap.is_finite()) {
        return Err(Error::invalid("f_trap", format!("must be positive, got {f_trap}")));
    }
    let c = &CODATA;
    let omega = 2.0 * PI * f_trap;
    Ok((2.0 * c.ke * c.e * c.e / (c.mass * omega * omega)).cbrt())
}

fn trap_frequency_for(d: f64) -> f64 {
    let c = &CODATA;
    (2.0 * c.ke * c.e * c.e / (c.mass * d.powi(3))).sqrt() / (2.0 * PI)
}

/// Energy splitting between ↑ and ↓ as a frequency (Hz): gμ_B·B/h.
pub fn larmor_splitting(b: f64) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(Error::invalid("field", format!("must be non-negative, got {b}")));
    }
    Ok(CODATA.g * CODATA.mu_b * b / CODATA.h)
}

/// Degeneracy lift Δω_A = gμ_B·grad·d/ħ (rad/s) between |↑↓⟩ and |↓↑⟩.
pub fn gradient_detuning(grad: f64, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::invalid("separation", format!("must be positive, got {d}")));
    }
    Ok(CODATA.gyromagnetic() * grad * d)
}

/// 4×4 matrix in the basis {↑↑, ↑↓, ↓↑, ↓↓}.
pub type Matrix4 = [[Complex64; 4]; 4];

/// Basis indices.
pub const UU: usize = 0;
pub const UD: usize = 1;
pub const DU: usize = 2;
pub const DD: usize = 3;

/// H/ħ = (ω₁σz₁ + ω₂σz₂)/2 + 2ξσz₁σz₂ − ξ(σx₁σx₂ + σy₁σy₂).
///
/// `omega_a1`/`omega_a2` are full per-spin splittings (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSpinHamiltonian {
    pub omega_a1: f64,
    pub omega_a2: f64,
    pub xi: f64,
}

pub fn build_hamiltonian(omega_a1: f64, omega_a2: f64, xi: f64) -> Result<TwoSpinHamiltonian> {
    if !(omega_a1.is_finite() && omega_a2.is_finite() && xi.is_finite()) {
        return Err(Error::invalid("hamiltonian", "non-finite rate"));
    }
    Ok(TwoSpinHamiltonian { omega_a1, omega_a2, xi })
}

impl TwoSpinHamiltonian {
    /// Matrix of H/ħ (rad/s).
    pub fn matrix(&self) -> Matrix4 {
        let zero = Complex64::new(0.0, 0.0);
        let mut m = [[zero; 4]; 4];
        let sum = 0.5 * (self.omega_a1 + self.omega_a2);
        let diff = 0.5 * (self.omega_a1 - self.omega_a2);
        m[UU][UU] = Complex64::new(sum + 2.0 * self.xi, 0.0);
        m[UD][UD] = Complex64::new(diff - 2.0 * self.xi, 0.0);
        m[DU][DU] = Complex64::new(-diff - 2.0 * self.xi, 0.0);
        m[DD][DD] = Complex64::new(-sum + 2.0 * self.xi, 0.0);
        // σx⊗σx + σy⊗σy = 2(|↑↓⟩⟨↓↑| + |↓↑⟩⟨↑↓|)
        m[UD][DU] = Complex64::new(-2.0 * self.xi, 0.0);
        m[DU][UD] = Complex64::new(-2.0 * self.xi, 0.0);
        m
    }

    /// Matrix of H in joules.
    pub fn energy_matrix(&self) -> Matrix4 {
        let mut m = self.matrix();
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v *= CODATA.hbar;
            }
        }
        m
    }

    pub fn dfs_rotation(&self) -> DfsRotation {
        DfsRotation { delta: self.omega_a1 - self.omega_a2, coupling: 4.0 * self.xi }
    }
}

/// Rotation vector of the DFS Bloch sphere (north pole |↑↓⟩, south pole |↓↑⟩).
///
/// `delta` is the rate about ẑ, `coupling` the rate about x̂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfsRotation {
    pub delta: f64,
    pub coupling: f64,
}

impl DfsRotation {
    pub fn rate(&self) -> f64 {
        self.delta.hypot(self.coupling)
    }

    /// Time for the coupling alone to carry |↑↓⟩ to χ₊ = (|↑↓⟩ + i|↓↑⟩)/√2.
    pub fn quarter_turn_time(&self) -> Option<f64> {
        (self.coupling != 0.0).then(|| PI / (2.0 * self.coupling.abs()))
    }
}

/// Reads the DFS rotation off an arbitrary H/ħ matrix, checking block structure.
pub fn dfs_effective_hamiltonian(m: &Matrix4) -> Result<DfsRotation> {
    const TOL: f64 = 1e-12;
    let scale = m.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let dfs = |i: usize| i == UD || i == DU;
    for i in 0..4 {
        for j in 0..4 {
            if i == j || (dfs(i) && dfs(j)) {
                continue;
            }
            if m[i][j].norm() > TOL * scale {
                return Err(Error::BlockStructure { row: i, col: j, magnitude: m[i][j].norm() });
            }
        }
    }
    Ok(DfsRotation { delta: (m[UD][UD] - m[DU][DU]).re, coupling: -2.0 * m[UD][DU].re })
}

/// Noiseless parity expectation `init_sign·sin(4ξT)·sin(φ_parity)`.
pub fn ideal_parity(t: f64, xi: f64, phi_parity: f64, init_sign: f64) -> f64 {
    init_sign * (4.0 * xi * t).sin() * phi_parity.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants_are_consistent() {
        assert_eq!(CODATA.h, 2.0 * PI * CODATA.hbar);
        assert!((2.002..=2.003).contains(&CODATA.g));
        assert_relative_eq!(CODATA.mass, 1.459_706_3e-25, max_relative = 1e-6);
    }

    #[test]
    fn coupling_at_working_distance() {
        // closed form evaluated independently in double precision
        let hz = coupling_strength_hz(2.4e-6).unwrap();
        assert_relative_eq!(hz, 9.411_352_724e-4, max_relative = 1e-8);
        let hz3 = coupling_strength_hz(3.0e-6).unwrap();
        assert_relative_eq!(hz3, 4.818_612_595e-4, max_relative = 1e-8);
    }

    #[test]
    fn coupling_scales_cubically() {
        let a = coupling_strength(2.0e-6).unwrap();
        let b = coupling_strength(4.0e-6).unwrap();
        assert_relative_eq!(a / b, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn non_positive_distance_rejected() {
        assert!(coupling_strength(0.0).is_err());
        assert!(coupling_strength(-1e-6).is_err());
        assert!(ion_separation(0.0).is_err());
        assert!(Geometry::from_separation(-2.0).is_err());
    }

    #[test]
    fn separation_from_trap_frequency() {
        // root of d(f) = 2.4 µm found by bisection outside this crate
        let d = ion_separation(2_406_669.83).unwrap();
        assert_relative_eq!(d, 2.4e-6, max_relative = 1e-8);
        let d241 = ion_separation(2.41e6).unwrap();
        assert_relative_eq!(d241, 2.4e-6, max_relative = 2e-3);
        let half = ion_separation(1.205e6).unwrap();
        assert_relative_eq!(half / d241, 2f64.powf(2.0 / 3.0), max_relative = 1e-12);
    }

    #[test]
    fn larmor_calibration() {
        assert_relative_eq!(larmor_splitting(0.44e-3).unwrap(), 12.33e6, max_relative = 1e-3);
        assert_eq!(larmor_splitting(0.0).unwrap(), 0.0);
        assert_relative_eq!(larmor_splitting(1e-7).unwrap(), 2.80e3, max_relative = 2e-3);
        assert!(larmor_splitting(-1.0).is_err());
    }

    #[test]
    fn gradient_detuning_values() {
        let dw = gradient_detuning(3e-7, 2.4e-6).unwrap();
        assert_relative_eq!(dw / (2.0 * PI), 0.020, max_relative = 0.02);
        assert_eq!(gradient_detuning(0.0, 2.4e-6).unwrap(), 0.0);
        assert_relative_eq!(gradient_detuning(6e-7, 2.4e-6).unwrap(), 2.0 * dw, max_relative = 1e-14);
        assert!(gradient_detuning(1e-7, 0.0).is_err());
    }

    #[test]
    fn zeeman_only_hamiltonian() {
        let w = 3.0;
        let m = build_hamiltonian(w, w, 0.0).unwrap().matrix();
        assert_relative_eq!((m[UU][UU] - m[DD][DD]).re, 2.0 * w);
        assert_eq!(m[UD][DU].norm(), 0.0);
        let m = build_hamiltonian(5.0, 2.0, 0.0).unwrap().matrix();
        assert_relative_eq!((m[UD][UD] - m[DU][DU]).re, 3.0);
    }

    #[test]
    fn psi_pm_split_by_four_xi() {
        let xi = 0.37;
        let m = build_hamiltonian(11.0, 11.0, xi).unwrap().matrix();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let apply = |v: [f64; 4]| -> [Complex64; 4] {
            let mut out = [Complex64::new(0.0, 0.0); 4];
            for i in 0..4 {
                for j in 0..4 {
                    out[i] += m[i][j] * v[j];
                }
            }
            out
        };
        let plus = apply([0.0, s, s, 0.0]);
        let minus = apply([0.0, s, -s, 0.0]);
        // eigenvectors: H v = λ v
        let lp = plus[UD].re / s;
        let lm = minus[UD].re / s;
        assert_relative_eq!(plus[DU].re / s, lp, epsilon = 1e-14);
        assert_relative_eq!(minus[DU].re / -s, lm, epsilon = 1e-14);
        assert_relative_eq!(lm - lp, 4.0 * xi, epsilon = 1e-14);
    }

    #[test]
    fn dfs_rotation_examples() {
        let xi = 2.0 * PI * 0.93e-3;
        let rot = dfs_effective_hamiltonian(&build_hamiltonian(1.0, 1.0, xi).unwrap().matrix()).unwrap();
        assert_eq!(rot.delta, 0.0);
        assert_relative_eq!(rot.coupling, 4.0 * xi);
        assert_relative_eq!(rot.quarter_turn_time().unwrap(), 67.2, max_relative = 2e-3);

        let rot = dfs_effective_hamiltonian(&build_hamiltonian(0.3, 0.1, 0.0).unwrap().matrix()).unwrap();
        assert_eq!(rot.coupling, 0.0);
        assert_relative_eq!(rot.delta, 0.2, epsilon = 1e-15);

        let rot = dfs_effective_hamiltonian(&build_hamiltonian(0.0, 0.0, 0.0).unwrap().matrix()).unwrap();
        assert_eq!(rot.rate(), 0.0);
        assert!(rot.quarter_turn_time().is_none());
    }

    #[test]
    fn off_block_elements_rejected() {
        let mut m = build_hamiltonian(1.0, 1.0, 0.1).unwrap().matrix();
        m[UU][UD] = Complex64::new(1e-3, 0.0);
        assert!(matches!(dfs_effective_hamiltonian(&m), Err(Error::BlockStructure { .. })));
    }

    #[test]
    fn ideal_parity_examples() {
        let xi = 2.0 * PI * 0.93e-3;
        assert_relative_eq!(ideal_parity(15.0, xi, PI / 2.0, 1.0), 0.3435, epsilon = 5e-4);
        assert_eq!(ideal_parity(0.0, xi, 0.7, 1.0), 0.0);
        assert_eq!(ideal_parity(15.0, xi, 0.0, 1.0), 0.0);
    }

    #[test]
    fn geometry_round_trip() {
        let g = Geometry::from_separation(2.4e-6).unwrap();
        let back = Geometry::from_trap_frequency(g.trap_frequency()).unwrap();
        assert_relative_eq!(back.separation(), 2.4e-6, max_relative = 1e-12);
    }
}
