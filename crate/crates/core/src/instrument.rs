//! Preparation and detection imperfections.
//!
//! Detection distinguishes three fluorescence classes: both bright (UU),
//! both dark (DD), and exactly one bright (ONE). Each spin is misread
//! independently: ↑ is read as ↓ with probability 1 − D_up, ↓ as ↑ with
//! probability 1 − D_down. D_up and D_down are affine in a calibration
//! variable (experiment time, or separation for distance scans) and clamped
//! to [0.5, 1].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{DensityMatrix, ProductState, TwoSpinState};

/// Observed detection class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectionOutcome {
    UU,
    DD,
    One,
}

impl DetectionOutcome {
    pub const ALL: [DetectionOutcome; 3] = [DetectionOutcome::UU, DetectionOutcome::DD, DetectionOutcome::One];

    pub fn index(self) -> usize {
        match self {
            DetectionOutcome::UU => 0,
            DetectionOutcome::DD => 1,
            DetectionOutcome::One => 2,
        }
    }

    pub fn of(state: ProductState) -> Self {
        match state {
            ProductState::UpUp => DetectionOutcome::UU,
            ProductState::DownDown => DetectionOutcome::DD,
            ProductState::UpDown | ProductState::DownUp => DetectionOutcome::One,
        }
    }

    /// Contribution to the parity estimator P_UU + P_DD − P_ONE.
    pub fn parity_sign(self) -> f64 {
        match self {
            DetectionOutcome::One => -1.0,
            _ => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DetectionOutcome::UU => "UU",
            DetectionOutcome::DD => "DD",
            DetectionOutcome::One => "ONE",
        }
    }
}

impl fmt::Display for DetectionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DetectionOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "UU" => Ok(DetectionOutcome::UU),
            "DD" => Ok(DetectionOutcome::DD),
            "ONE" | "1" => Ok(DetectionOutcome::One),
            other => Err(Error::invalid("outcome", format!("unknown class {other:?}"))),
        }
    }
}

/// D(x) = clamp(intercept + slope·x, 0.5, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionCurve {
    pub intercept: f64,
    pub slope: f64,
}

impl DetectionCurve {
    pub fn constant(d: f64) -> Self {
        Self { intercept: d, slope: 0.0 }
    }

    pub fn at(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x).clamp(0.5, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentModel {
    /// Per-spin probability of landing in the target orientation.
    pub prep_fidelity: f64,
    pub d_up: DetectionCurve,
    pub d_down: DetectionCurve,
    /// Collective π-pulse length (s); pulses are applied instantaneously.
    pub pi_pulse_duration: f64,
    /// RMS rotation-angle error per collective pulse (rad).
    pub pulse_error: f64,
}

impl InstrumentModel {
    pub fn ideal() -> Self {
        Self {
            prep_fidelity: 1.0,
            d_up: DetectionCurve::constant(1.0),
            d_down: DetectionCurve::constant(1.0),
            pi_pulse_duration: 10e-6,
            pulse_error: 0.0,
        }
    }

    pub fn with_symmetric_detection(d: f64) -> Self {
        Self { d_up: DetectionCurve::constant(d), d_down: DetectionCurve::constant(d), ..Self::ideal() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prep_fidelity) {
            return Err(Error::invalid("prep_fidelity", format!("{} is not a probability", self.prep_fidelity)));
        }
        if !(self.pulse_error >= 0.0 && self.pi_pulse_duration >= 0.0) {
            return Err(Error::invalid("instrument", "pulse error and duration must be non-negative"));
        }
        for c in [self.d_up, self.d_down] {
            if !(c.intercept.is_finite() && c.slope.is_finite()) {
                return Err(Error::invalid("detection curve", "non-finite coefficient"));
            }
        }
        Ok(())
    }

    /// (D_up, D_down) at calibration coordinate `x`.
    pub fn fidelities(&self, x: f64) -> (f64, f64) {
        (self.d_up.at(x), self.d_down.at(x))
    }

    pub fn confusion_matrix(&self, x: f64) -> ConfusionMatrix {
        let (u, d) = self.fidelities(x);
        ConfusionMatrix::from_fidelities(u, d)
    }
}

/// Distribution over product states after independent per-spin flips.
pub fn preparation_distribution(target: ProductState, fidelity: f64) -> [f64; 4] {
    let (a, b) = target.spins();
    let mut p = [0.0; 4];
    for s in ProductState::ALL {
        let (x, y) = s.spins();
        let pa = if x == a { fidelity } else { 1.0 - fidelity };
        let pb = if y == b { fidelity } else { 1.0 - fidelity };
        p[s.index()] = pa * pb;
    }
    p
}

/// Samples the prepared product state; each spin is flipped with probability 1 − F.
pub fn prepare_product<R: Rng + ?Sized>(target: ProductState, model: &InstrumentModel, rng: &mut R) -> ProductState {
    let (a, b) = target.spins();
    let a = if rng.random::<f64>() < model.prep_fidelity { a } else { !a };
    let b = if rng.random::<f64>() < model.prep_fidelity { b } else { !b };
    ProductState::from_spins(a, b)
}

pub fn prepare_state<R: Rng + ?Sized>(target: ProductState, model: &InstrumentModel, rng: &mut R) -> TwoSpinState {
    TwoSpinState::basis(prepare_product(target, model, rng))
}

/// ρ = F|Ψ₊⟩⟨Ψ₊| + (1 − F)·𝟙/4.
pub fn prepare_entangled(fidelity: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::invalid("entangled fidelity", format!("{fidelity} is not a probability")));
    }
    let mut rho = DensityMatrix::zero();
    rho.add_scaled(&TwoSpinState::psi_plus().density(), fidelity);
    rho.add_scaled(&DensityMatrix::maximally_mixed(), 1.0 - fidelity);
    Ok(rho)
}

/// One pure-state draw from the ensemble of [`prepare_entangled`].
pub fn sample_entangled<R: Rng + ?Sized>(fidelity: f64, rng: &mut R) -> TwoSpinState {
    if rng.random::<f64>() < fidelity {
        TwoSpinState::psi_plus()
    } else {
        TwoSpinState::basis(ProductState::from_index(rng.random_range(0..4)))
    }
}

/// Reads one spin: `true` is a bright (↑) classification.
#[inline]
fn read_spin<R: Rng + ?Sized>(up: bool, d_up: f64, d_down: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    if up {
        u < d_up
    } else {
        u >= d_down
    }
}

/// Classifies a known basis state through the per-spin readout channel.
pub fn classify<R: Rng + ?Sized>(state: ProductState, d_up: f64, d_down: f64, rng: &mut R) -> DetectionOutcome {
    let (a, b) = state.spins();
    let a = read_spin(a, d_up, d_down, rng);
    let b = read_spin(b, d_up, d_down, rng);
    DetectionOutcome::of(ProductState::from_spins(a, b))
}

/// Samples a basis state from `probs` and passes it through the readout channel at `x`.
pub fn detect<R: Rng + ?Sized>(
    probs: &[f64; 4],
    model: &InstrumentModel,
    x: f64,
    rng: &mut R,
) -> Result<DetectionOutcome> {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 || probs.iter().any(|&p| p < -1e-12) {
        return Err(Error::invalid("state probabilities", format!("sum to {total}")));
    }
    let (d_up, d_down) = model.fidelities(x);
    Ok(classify(sample_basis(probs, rng), d_up, d_down, rng))
}

pub(crate) fn sample_basis<R: Rng + ?Sized>(probs: &[f64; 4], rng: &mut R) -> ProductState {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return ProductState::from_index(i);
        }
    }
    ProductState::from_index(probs.iter().rposition(|&p| p > 0.0).unwrap_or(3))
}

/// α = 1 − 4D(1 − D) = (2D − 1)² with D the mean of D_up and D_down.
pub fn detection_contrast(model: &InstrumentModel, x: f64) -> f64 {
    let (u, d) = model.fidelities(x);
    contrast_from_fidelity(0.5 * (u + d))
}

pub fn contrast_from_fidelity(d: f64) -> f64 {
    1.0 - 4.0 * d * (1.0 - d)
}

/// Column-stochastic map from true class to observed class, indexed
/// `[observed][true]` over (UU, DD, ONE).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionMatrix(pub [[f64; 3]; 3]);

impl ConfusionMatrix {
    pub fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn from_fidelities(u: f64, d: f64) -> Self {
        let (eu, ed) = (1.0 - u, 1.0 - d);
        // true ↑↓ and ↓↑ give the same column under independent flips
        Self([
            [u * u, ed * ed, u * ed],
            [eu * eu, d * d, eu * d],
            [2.0 * u * eu, 2.0 * d * ed, u * d + eu * ed],
        ])
    }

    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [0, 1, 2].map(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2])
    }
}

/// Outcome distribution of the readout channel for given basis populations.
pub fn outcome_distribution(probs: &[f64; 4], d_up: f64, d_down: f64) -> [f64; 3] {
    let classes = class_probabilities(probs);
    ConfusionMatrix::from_fidelities(d_up, d_down).apply(&classes)
}

/// Basis populations folded onto (UU, DD, ONE).
pub fn class_probabilities(probs: &[f64; 4]) -> [f64; 3] {
    [probs[0], probs[3], probs[1] + probs[2]]
}

/// Calibration class: which prepared state the fidelity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalibrationClass {
    #[serde(rename = "UU")]
    Up,
    #[serde(rename = "DD")]
    Down,
}

impl FromStr for CalibrationClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "UU" | "UP" => Ok(CalibrationClass::Up),
            "DD" | "DOWN" => Ok(CalibrationClass::Down),
            other => Err(Error::invalid("calibration class", format!("unknown label {other:?}"))),
        }
    }
}

/// One measured detection fidelity at calibration coordinate `x` (s or m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub x: f64,
    pub class: CalibrationClass,
    pub fidelity: f64,
}

impl CalibrationPoint {
    pub fn up(x: f64, fidelity: f64) -> Self {
        Self { x, class: CalibrationClass::Up, fidelity }
    }

    pub fn down(x: f64, fidelity: f64) -> Self {
        Self { x, class: CalibrationClass::Down, fidelity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionCurves {
    pub up: DetectionCurve,
    pub down: DetectionCurve,
}

impl DetectionCurves {
    pub fn apply_to(&self, model: &InstrumentModel) -> InstrumentModel {
        InstrumentModel { d_up: self.up, d_down: self.down, ..*model }
    }
}

/// Least-squares line per class.
pub fn fidelity_from_calibration(points: &[CalibrationPoint]) -> Result<DetectionCurves> {
    let fit = |class: CalibrationClass| -> Result<DetectionCurve> {
        let pts: Vec<_> = points.iter().filter(|p| p.class == class).collect();
        if pts.len() < 2 {
            return Err(Error::InsufficientData(format!("{class:?} class needs at least 2 calibration points")));
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.x).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.fidelity).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.x - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.x - mx) * (p.fidelity - my)).sum();
        if sxx <= 1e-300 * n || sxx == 0.0 {
            return Err(Error::InsufficientData(format!("{class:?} calibration points share a single coordinate")));
        }
        let slope = sxy / sxx;
        Ok(DetectionCurve { intercept: my - slope * mx, slope })
    };
    Ok(DetectionCurves { up: fit(CalibrationClass::Up)?, down: fit(CalibrationClass::Down)? })
}

#[derive(Debug, Deserialize)]
struct CalibrationRow {
    x: f64,
    class: String,
    fidelity: f64,
}

/// Reads a calibration table: CSV with header `x,class,fidelity`, `#` comments allowed.
pub fn read_calibration_table(path: &Path) -> Result<Vec<CalibrationPoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration_table(&text).map_err(|message| Error::Parse { path: path.to_path_buf(), message })
}

pub fn parse_calibration_table(text: &str) -> std::result::Result<Vec<CalibrationPoint>, String> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<CalibrationRow>().enumerate() {
        let row = row.map_err(|e| format!("row {}: {e}", i + 1))?;
        let class = row.class.parse().map_err(|e: Error| format!("row {}: {e}", i + 1))?;
        if !(0.0..=1.0).contains(&row.fidelity) {
            return Err(format!("row {}: fidelity {} outside [0, 1]", i + 1, row.fidelity));
        }
        out.push(CalibrationPoint { x: row.x, class, fidelity: row.fidelity });
    }
    Ok(out)
}

pub fn format_calibration_table(points: &[CalibrationPoint]) -> String {
    let mut s = String::from("x,class,fidelity\n");
    for p in points {
        let class = match p.class {
            CalibrationClass::Up => "UU",
            CalibrationClass::Down => "DD",
        };
        s.push_str(&format!("{},{},{}\n", p.x, class, p.fidelity));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn preparation_law() {
        let p = preparation_distribution(ProductState::UpDown, 0.98);
        assert_relative_eq!(p[ProductState::UpDown.index()], 0.9604, epsilon = 1e-12);
        assert_relative_eq!(p[ProductState::UpUp.index()], 0.0196, epsilon = 1e-12);
        assert_relative_eq!(p[ProductState::DownDown.index()], 0.0196, epsilon = 1e-12);
        assert_relative_eq!(p[ProductState::DownUp.index()], 0.0004, epsilon = 1e-12);
        assert_eq!(preparation_distribution(ProductState::DownUp, 1.0), [0.0, 0.0, 1.0, 0.0]);
        for v in preparation_distribution(ProductState::UpUp, 0.5) {
            assert_relative_eq!(v, 0.25);
        }
    }

    #[test]
    fn perfect_preparation_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = prepare_state(ProductState::UpDown, &InstrumentModel::ideal(), &mut rng);
            assert_eq!(s, TwoSpinState::basis(ProductState::UpDown));
        }
    }

    #[test]
    fn sampled_preparation_matches_law() {
        let model = InstrumentModel { prep_fidelity: 0.98, ..InstrumentModel::ideal() };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[prepare_product(ProductState::UpDown, &model, &mut rng).index()] += 1;
        }
        let p = preparation_distribution(ProductState::UpDown, 0.98);
        for i in 0..4 {
            let sigma = (p[i] * (1.0 - p[i]) / n as f64).sqrt();
            assert!((counts[i] as f64 / n as f64 - p[i]).abs() <= 3.0 * sigma + 1e-12, "state {i}");
        }
    }

    #[test]
    fn entangled_mixture() {
        let rho = prepare_entangled(1.0).unwrap();
        assert_relative_eq!(rho.parity(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(prepare_entangled(0.95).unwrap().parity(), 0.95, epsilon = 1e-15);
        assert_eq!(prepare_entangled(0.0).unwrap().parity(), 0.0);
        assert_relative_eq!(prepare_entangled(0.3).unwrap().trace(), 1.0, epsilon = 1e-15);
        assert!(prepare_entangled(1.5).is_err());
    }

    #[test]
    fn perfect_detection_of_one_bright() {
        let model = InstrumentModel::ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            assert_eq!(detect(&[0.0, 1.0, 0.0, 0.0], &model, 0.0, &mut rng).unwrap(), DetectionOutcome::One);
        }
    }

    #[test]
    fn confusion_columns() {
        let d = 0.912;
        let c = ConfusionMatrix::from_fidelities(d, d);
        assert_relative_eq!(c.0[0][0], d * d, epsilon = 1e-15);
        assert_relative_eq!(c.0[2][2], 0.8395, epsilon = 1e-4);
        for j in 0..3 {
            assert_relative_eq!((0..3).map(|i| c.0[i][j]).sum::<f64>(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn unnormalized_probabilities_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        assert!(detect(&[0.5, 0.2, 0.0, 0.0], &InstrumentModel::ideal(), 0.0, &mut rng).is_err());
    }

    #[test]
    fn contrast_formula() {
        assert_eq!(contrast_from_fidelity(1.0), 1.0);
        assert_eq!(contrast_from_fidelity(0.5), 0.0);
        assert_relative_eq!(contrast_from_fidelity(0.912), 0.68, epsilon = 2e-3);
        assert_relative_eq!(contrast_from_fidelity(0.5 * (1.0 + 0.68f64.sqrt())), 0.68, epsilon = 1e-12);
        let m = InstrumentModel { d_up: DetectionCurve::constant(0.93), d_down: DetectionCurve::constant(0.894), ..InstrumentModel::ideal() };
        assert_relative_eq!(detection_contrast(&m, 0.0), (2.0 * 0.912 - 1.0f64).powi(2), epsilon = 1e-12);
    }

    #[test]
    fn curves_are_clamped() {
        let c = DetectionCurve { intercept: 1.2, slope: -0.1 };
        assert_eq!(c.at(0.0), 1.0);
        assert_eq!(c.at(100.0), 0.5);
    }

    #[test]
    fn two_point_calibration() {
        let pts = [
            CalibrationPoint::up(5.0, 0.95),
            CalibrationPoint::up(25.0, 0.88),
            CalibrationPoint::down(5.0, 0.95),
            CalibrationPoint::down(25.0, 0.88),
        ];
        let curves = fidelity_from_calibration(&pts).unwrap();
        assert_relative_eq!(curves.up.slope, -0.0035, epsilon = 1e-12);
        assert_relative_eq!(curves.up.at(15.0), 0.915, epsilon = 1e-12);
        let model = curves.apply_to(&InstrumentModel::ideal());
        assert_relative_eq!(detection_contrast(&model, 15.0), 0.6889, epsilon = 1e-4);
    }

    #[test]
    fn flat_and_degenerate_calibrations() {
        let flat = [
            CalibrationPoint::up(1.0, 0.9),
            CalibrationPoint::up(2.0, 0.9),
            CalibrationPoint::down(1.0, 0.8),
            CalibrationPoint::down(3.0, 0.8),
        ];
        let c = fidelity_from_calibration(&flat).unwrap();
        assert_eq!(c.up.slope, 0.0);
        let single = [
            CalibrationPoint::up(5.0, 0.9),
            CalibrationPoint::up(5.0, 0.8),
            CalibrationPoint::down(1.0, 0.8),
            CalibrationPoint::down(3.0, 0.8),
        ];
        assert!(fidelity_from_calibration(&single).is_err());
        assert!(fidelity_from_calibration(&flat[..3]).is_err());
    }

    #[test]
    fn calibration_table_parsing() {
        let text = "# fig 2a\nx,class,fidelity\n5, UU, 0.95\n25,UU,0.88\n5,DD,0.94\n25,DD,0.87\n";
        let pts = parse_calibration_table(text).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[2].class, CalibrationClass::Down);
        assert_eq!(parse_calibration_table(&format_calibration_table(&pts)).unwrap(), pts);
        assert!(parse_calibration_table("x,class,fidelity\n1,XX,0.9\n").is_err());
        assert!(parse_calibration_table("x,class,fidelity\n1,UU,1.9\n").is_err());
    }
}
