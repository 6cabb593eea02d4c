//! Estimators and fits over measurement records.

pub mod adev;
pub mod fit;
pub mod parity;
pub mod witness;

pub use adev::{adev_slope, allan_deviation, log_tau_grid, parity_series, AdevPoint};
pub use fit::{
    fit_coherence_time, fit_coupling_from_fringe, fit_power_law, fit_visibility_vs_time, fringe_free_phase,
    levenberg_marquardt, visibility_from_fringe, FitResult, FringePoint, Parameter,
};
pub use parity::{bootstrap_sigma, estimate_parity, parity_from_counts, ParityEstimate};
pub use witness::{mle_correct, swap_witness, swap_witness_from_record, witness_estimate, MleResult, WitnessEstimate};
