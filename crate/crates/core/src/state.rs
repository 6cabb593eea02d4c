//! Two-spin quantum states over the basis {↑↑, ↑↓, ↓↑, ↓↓}.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::physics::{Matrix4, DD, DU, UD, UU};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Computational product states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductState {
    #[serde(rename = "uu")]
    UpUp,
    #[serde(rename = "ud")]
    UpDown,
    #[serde(rename = "du")]
    DownUp,
    #[serde(rename = "dd")]
    DownDown,
}

impl ProductState {
    pub const ALL: [ProductState; 4] =
        [ProductState::UpUp, ProductState::UpDown, ProductState::DownUp, ProductState::DownDown];

    pub fn index(self) -> usize {
        match self {
            ProductState::UpUp => UU,
            ProductState::UpDown => UD,
            ProductState::DownUp => DU,
            ProductState::DownDown => DD,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    /// (spin 1 up, spin 2 up)
    pub fn spins(self) -> (bool, bool) {
        match self {
            ProductState::UpUp => (true, true),
            ProductState::UpDown => (true, false),
            ProductState::DownUp => (false, true),
            ProductState::DownDown => (false, false),
        }
    }

    pub fn from_spins(first_up: bool, second_up: bool) -> Self {
        match (first_up, second_up) {
            (true, true) => ProductState::UpUp,
            (true, false) => ProductState::UpDown,
            (false, true) => ProductState::DownUp,
            (false, false) => ProductState::DownDown,
        }
    }

    /// Exchange of the two spins.
    pub fn swapped(self) -> Self {
        let (a, b) = self.spins();
        Self::from_spins(b, a)
    }

    pub fn in_dfs(self) -> bool {
        matches!(self, ProductState::UpDown | ProductState::DownUp)
    }

    pub fn label(self) -> &'static str {
        match self {
            ProductState::UpUp => "uu",
            ProductState::UpDown => "ud",
            ProductState::DownUp => "du",
            ProductState::DownDown => "dd",
        }
    }
}

impl fmt::Display for ProductState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ProductState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uu" | "upup" => Ok(ProductState::UpUp),
            "ud" | "updown" => Ok(ProductState::UpDown),
            "du" | "downup" => Ok(ProductState::DownUp),
            "dd" | "downdown" => Ok(ProductState::DownDown),
            other => Err(Error::invalid("product state", format!("unknown label {other:?}"))),
        }
    }
}

/// Pure state amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSpinState(pub [Complex64; 4]);

impl TwoSpinState {
    pub fn basis(s: ProductState) -> Self {
        let mut a = [ZERO; 4];
        a[s.index()] = ONE;
        Self(a)
    }

    /// (|↑↓⟩ + |↓↑⟩)/√2
    pub fn psi_plus() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self([ZERO, s, s, ZERO])
    }

    /// (|↑↓⟩ + i|↓↑⟩)/√2
    pub fn chi_plus() -> Self {
        Self([ZERO, Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, FRAC_1_SQRT_2), ZERO])
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.0.map(|a| a.norm_sqr())
    }

    /// |⟨self|other⟩|²
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr()
    }

    /// ⟨Π⟩ = a*b + b*a for the DFS amplitudes a (↑↓) and b (↓↑).
    pub fn parity(&self) -> f64 {
        2.0 * (self.0[UD].conj() * self.0[DU]).re
    }

    /// DFS Bloch vector (x, y, z) with |↑↓⟩ at the north pole; its length is the DFS weight.
    pub fn dfs_bloch(&self) -> [f64; 3] {
        let c = self.0[UD].conj() * self.0[DU];
        [2.0 * c.re, 2.0 * c.im, self.0[UD].norm_sqr() - self.0[DU].norm_sqr()]
    }

    pub fn density(&self) -> DensityMatrix {
        let mut m = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = self.0[i] * self.0[j].conj();
            }
        }
        DensityMatrix(m)
    }
}

/// 4×4 density operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub Matrix4);

impl DensityMatrix {
    pub fn zero() -> Self {
        Self([[ZERO; 4]; 4])
    }

    pub fn maximally_mixed() -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Complex64::new(0.25, 0.0);
        }
        Self(m)
    }

    /// Classical mixture of product states with the given weights.
    pub fn diagonal(weights: [f64; 4]) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, w) in weights.into_iter().enumerate() {
            m[i][i] = Complex64::new(w, 0.0);
        }
        Self(m)
    }

    pub fn add_scaled(&mut self, other: &DensityMatrix, w: f64) {
        for i in 0..4 {
            for j in 0..4 {
                self.0[i][j] += other.0[i][j] * w;
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.0[i][i].re).sum()
    }

    pub fn populations(&self) -> [f64; 4] {
        [self.0[0][0].re, self.0[1][1].re, self.0[2][2].re, self.0[3][3].re]
    }

    /// ⟨Π⟩ = ρ₂₃ + ρ₃₂.
    pub fn parity(&self) -> f64 {
        (self.0[UD][DU] + self.0[DU][UD]).re
    }

    /// ⟨SWAP⟩ = ρ₁₁ + ρ₄₄ + ρ₂₃ + ρ₃₂.
    pub fn swap_expectation(&self) -> f64 {
        self.0[UU][UU].re + self.0[DD][DD].re + self.parity()
    }

    /// Restriction to span{↑↓, ↓↑}.
    pub fn dfs_block(&self) -> [[Complex64; 2]; 2] {
        [[self.0[UD][UD], self.0[UD][DU]], [self.0[DU][UD], self.0[DU][DU]]]
    }
}

/// Trace distance ½‖a − b‖₁ between two 2×2 Hermitian blocks.
pub fn trace_distance_2x2(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> f64 {
    let p = (a[0][0] - b[0][0]).re;
    let q = (a[1][1] - b[1][1]).re;
    let off = a[0][1] - b[0][1];
    let mean = 0.5 * (p + q);
    let radius = (0.25 * (p - q) * (p - q) + off.norm_sqr()).sqrt();
    0.5 * ((mean + radius).abs() + (mean - radius).abs())
}
