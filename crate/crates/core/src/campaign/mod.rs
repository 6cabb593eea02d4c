//! Experiment configuration, preset campaigns and their reports.

pub mod config;
pub mod report;
pub mod run;
pub mod tools;

pub use config::{apply_overrides, format_config, parse_config, parse_config_str, ExperimentConfig, OutputFormat};
pub use report::{emit_outputs, BandCheck, CampaignReport, Node, Provenance, Table};
pub use run::{plan, preset_config, preset_text, run_campaign, run_cell, simulate, PlannedCell, Role, PRESETS};
pub use tools::{adev_report, calibration_report, fit_records};
