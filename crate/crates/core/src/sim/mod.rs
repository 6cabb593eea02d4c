//! Pulse sequences and the Monte-Carlo shot engine.

pub mod engine;
pub mod propagate;
pub mod record;
pub mod sequence;

pub use engine::{run_experiment, run_shot, run_shots, ShotConfig, ShotResult, ShotRngs};
pub use propagate::{apply_collective_pulse, apply_differential_phase, evolve_segment, Drive};
pub use record::{MeasurementRecord, Readout, RecordMeta};
pub use sequence::{build_standard_sequence, PrepTarget, PulseAxis, PulseSequence, Segment, SequenceBuilder, Sign};
