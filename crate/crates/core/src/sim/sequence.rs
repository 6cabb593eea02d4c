//! Pulse-sequence timeline.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::ProductState;

/// Sign of the interleaved initial phase: `Minus` is φ_init = π.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "1",
            Sign::Minus => "-1",
        })
    }
}

impl FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "+1" | "+" => Ok(Sign::Plus),
            "-1" | "-" => Ok(Sign::Minus),
            other => Err(Error::invalid("sign", format!("expected +1 or -1, got {other:?}"))),
        }
    }
}

/// Axis of a collective rotation in the equatorial plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseAxis {
    X,
    Y,
}

impl PulseAxis {
    /// Azimuth of the axis (rad).
    pub fn azimuth(self) -> f64 {
        match self {
            PulseAxis::X => 0.0,
            PulseAxis::Y => FRAC_PI_2,
        }
    }
}

/// Axis of the parity-analysis π/2 pulse. Any equatorial axis maps the DFS
/// coherence onto P_UU + P_DD − P_ONE identically; ŷ is used throughout.
pub const ANALYSIS_AXIS: PulseAxis = PulseAxis::Y;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PrepTarget {
    Product(ProductState),
    /// Noisy Ψ₊ with the given state fidelity.
    Entangled { fidelity: f64 },
}

impl PrepTarget {
    pub fn label(&self) -> String {
        match self {
            PrepTarget::Product(s) => s.label().to_string(),
            PrepTarget::Entangled { .. } => "psi+".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// With `Sign::Minus` a product target is prepared with its spins exchanged.
    Prepare { target: PrepTarget, init_sign: Sign },
    FreeEvolve { duration: f64 },
    CollectivePulse { axis: PulseAxis, angle: f64 },
    /// Relative phase φ between |↑↓⟩ and |↓↑⟩.
    DifferentialPhase { phi: f64 },
    Measure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedSegment {
    /// Absolute start time (s).
    pub start: f64,
    pub segment: Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    segments: Vec<TimedSegment>,
    duration: f64,
    echo_rate: Option<f64>,
}

impl PulseSequence {
    /// Lays out segments back to back and checks the Prepare/Measure framing.
    pub fn from_segments(segments: Vec<Segment>, echo_rate: Option<f64>) -> Result<Self> {
        let n = segments.len();
        if n < 2 {
            return Err(Error::Sequence("needs at least Prepare and Measure".into()));
        }
        let prepares = segments.iter().filter(|s| matches!(s, Segment::Prepare { .. })).count();
        let measures = segments.iter().filter(|s| matches!(s, Segment::Measure)).count();
        if prepares != 1 || !matches!(segments[0], Segment::Prepare { .. }) {
            return Err(Error::Sequence("exactly one Prepare, first".into()));
        }
        if measures != 1 || !matches!(segments[n - 1], Segment::Measure) {
            return Err(Error::Sequence("exactly one Measure, last".into()));
        }
        let mut t = 0.0;
        let mut timed = Vec::with_capacity(n);
        for segment in segments {
            if let Segment::FreeEvolve { duration } = segment {
                if !(duration >= 0.0 && duration.is_finite()) {
                    return Err(Error::Sequence(format!("negative or non-finite free evolution {duration}")));
                }
                timed.push(TimedSegment { start: t, segment });
                t += duration;
            } else {
                timed.push(TimedSegment { start: t, segment });
            }
        }
        Ok(Self { segments: timed, duration: t, echo_rate })
    }

    pub fn segments(&self) -> &[TimedSegment] {
        &self.segments
    }

    /// Total free-evolution time T (s).
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn echo_rate(&self) -> Option<f64> {
        self.echo_rate
    }

    pub fn prep(&self) -> (PrepTarget, Sign) {
        match self.segments[0].segment {
            Segment::Prepare { target, init_sign } => (target, init_sign),
            _ => unreachable!("validated on construction"),
        }
    }

    /// Copy with the Prepare sign replaced.
    pub fn with_init_sign(&self, sign: Sign) -> Self {
        let mut out = self.clone();
        if let Segment::Prepare { init_sign, .. } = &mut out.segments[0].segment {
            *init_sign = sign;
        }
        out
    }

    /// Start times of the π pulses about x̂.
    pub fn echo_times(&self) -> Vec<f64> {
        self.segments
            .iter()
            .filter(|s| matches!(s.segment, Segment::CollectivePulse { axis: PulseAxis::X, angle } if angle == std::f64::consts::PI))
            .map(|s| s.start)
            .collect()
    }
}

/// Options for the standard spin-spin sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceBuilder {
    pub t: f64,
    pub f0: f64,
    pub phi_parity: f64,
    pub init_sign: Sign,
    pub init: PrepTarget,
    /// Insert the π-pulse echo train.
    pub echo: bool,
    /// `None` reads populations directly (no differential phase, no analysis pulse).
    pub analysis: Option<PulseAxis>,
}

impl SequenceBuilder {
    pub fn new(t: f64, f0: f64, phi_parity: f64) -> Self {
        Self {
            t,
            f0,
            phi_parity,
            init_sign: Sign::Plus,
            init: PrepTarget::Product(ProductState::UpDown),
            echo: true,
            analysis: Some(ANALYSIS_AXIS),
        }
    }

    pub fn build(&self) -> Result<PulseSequence> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::Sequence(format!("duration must be positive, got {}", self.t)));
        }
        let mut segs = vec![Segment::Prepare { target: self.init, init_sign: self.init_sign }];
        if self.echo {
            if !(self.f0 > 0.0) {
                return Err(Error::Sequence(format!("echo rate must be positive, got {}", self.f0)));
            }
            let pulses = self.t * self.f0;
            let n = pulses.round();
            if (pulses - n).abs() > 1e-9 * pulses.max(1.0) || n < 2.0 || n % 2.0 != 0.0 {
                return Err(Error::Sequence(format!(
                    "T·f0 = {pulses} must be a positive even integer so the echo pulses pair up"
                )));
            }
            let n = n as usize;
            let gap = 1.0 / self.f0;
            segs.push(Segment::FreeEvolve { duration: 0.5 * gap });
            for i in 0..n {
                segs.push(Segment::CollectivePulse { axis: PulseAxis::X, angle: std::f64::consts::PI });
                segs.push(Segment::FreeEvolve { duration: if i + 1 == n { 0.5 * gap } else { gap } });
            }
        } else {
            segs.push(Segment::FreeEvolve { duration: self.t });
        }
        if let Some(axis) = self.analysis {
            segs.push(Segment::DifferentialPhase { phi: self.phi_parity });
            segs.push(Segment::CollectivePulse { axis, angle: FRAC_PI_2 });
        }
        segs.push(Segment::Measure);
        PulseSequence::from_segments(segs, self.echo.then_some(self.f0))
    }
}

/// Prepare → symmetric echo train of total length T → φ_parity → π/2 analysis → Measure.
pub fn build_standard_sequence(
    t: f64,
    f0: f64,
    phi_parity: f64,
    init_sign: Sign,
    init: ProductState,
) -> Result<PulseSequence> {
    SequenceBuilder { init_sign, init: PrepTarget::Product(init), ..SequenceBuilder::new(t, f0, phi_parity) }.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fifteen_second_train_has_thirty_pulses() {
        let seq = build_standard_sequence(15.0, 2.0, FRAC_PI_2, Sign::Plus, ProductState::UpDown).unwrap();
        let times = seq.echo_times();
        assert_eq!(times.len(), 30);
        assert_relative_eq!(seq.duration(), 15.0, epsilon = 1e-12);
        assert_relative_eq!(times[0], 0.25, epsilon = 1e-12);
        for w in times.windows(2) {
            assert_relative_eq!(w[1] - w[0], 0.5, epsilon = 1e-12);
        }
        assert_relative_eq!(15.0 - times[29], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn odd_pulse_count_rejected() {
        assert!(build_standard_sequence(0.5, 2.0, 0.0, Sign::Plus, ProductState::UpDown).is_err());
        assert!(build_standard_sequence(1.25, 2.0, 0.0, Sign::Plus, ProductState::UpDown).is_err());
        assert!(build_standard_sequence(0.0, 2.0, 0.0, Sign::Plus, ProductState::UpDown).is_err());
        assert!(build_standard_sequence(1.0, 2.0, 0.0, Sign::Plus, ProductState::UpDown).is_ok());
    }

    #[test]
    fn zero_parity_phase_is_identity_segment() {
        let seq = build_standard_sequence(1.0, 2.0, 0.0, Sign::Plus, ProductState::UpDown).unwrap();
        let phase = seq.segments().iter().find_map(|s| match s.segment {
            Segment::DifferentialPhase { phi } => Some(phi),
            _ => None,
        });
        assert_eq!(phase, Some(0.0));
    }

    #[test]
    fn framing_is_enforced() {
        let prep = Segment::Prepare { target: PrepTarget::Product(ProductState::UpDown), init_sign: Sign::Plus };
        assert!(PulseSequence::from_segments(vec![prep, Segment::Measure], None).is_ok());
        assert!(PulseSequence::from_segments(vec![Segment::Measure, prep], None).is_err());
        assert!(PulseSequence::from_segments(vec![prep, prep, Segment::Measure], None).is_err());
        assert!(PulseSequence::from_segments(
            vec![prep, Segment::FreeEvolve { duration: -1.0 }, Segment::Measure],
            None
        )
        .is_err());
    }

    #[test]
    fn population_readout_has_no_analysis() {
        let seq = SequenceBuilder { analysis: None, ..SequenceBuilder::new(2.0, 2.0, 1.0) }.build().unwrap();
        assert!(seq.segments().iter().all(|s| !matches!(s.segment, Segment::DifferentialPhase { .. })));
        assert_eq!(seq.echo_times().len(), 4);
    }

    #[test]
    fn sign_round_trip() {
        for s in [Sign::Plus, Sign::Minus] {
            assert_eq!(s.to_string().parse::<Sign>().unwrap(), s);
        }
        let seq = build_standard_sequence(1.0, 2.0, 0.0, Sign::Plus, ProductState::UpDown).unwrap();
        assert_eq!(seq.with_init_sign(Sign::Minus).prep().1, Sign::Minus);
    }
}
