use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dipolar::campaign::{
    adev_report, apply_overrides, calibration_report, emit_outputs, fit_records, parse_config_str, preset_config,
    run_campaign, simulate, CampaignReport, ExperimentConfig, OutputFormat,
};
use dipolar::instrument::read_calibration_table;
use dipolar::sim::record::{read_records, read_shot_series};
use dipolar::Error;

/// Two-spin dipolar coupling simulator.
#[derive(Parser)]
#[command(name = "dipolar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shots per grid point (overrides the configuration).
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Output directory [default: configuration output.dir, else ./out].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Report format: kv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with status 4 when a reported quantity misses its acceptance band.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration file over its phase list.
    Simulate { config: PathBuf },
    /// Run a preset campaign (fig2a, fig2b, fig2c, fig3a, fig3b, fig3c, fig4).
    Campaign {
        name: String,
        /// Dotted key=value setting, e.g. sequence.t=5 (repeatable).
        #[arg(long = "override", value_name = "K=V")]
        overrides: Vec<String>,
    },
    /// Fit parity fringes (and ξ) from a records CSV.
    Fit {
        records: PathBuf,
        /// Configuration supplying the detection model for α.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Bootstrap resamples for a cross-check of each σ (0 = off).
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
    },
    /// Allan deviation of a shot-series CSV.
    Adev { records: PathBuf },
    /// Fit detection-fidelity curves from an x,class,fidelity table.
    Calibrate { table: PathBuf },
}

const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;
const BAND_MISS: u8 = 4;

struct Failure(u8, String);

fn config_failure(e: Error) -> Failure {
    Failure(CONFIG_ERROR, e.to_string())
}

fn runtime_failure(e: Error) -> Failure {
    Failure(RUNTIME_ERROR, e.to_string())
}

fn overrides(common: &Common, mut extra: Vec<String>) -> Vec<String> {
    if let Some(s) = common.seed {
        extra.push(format!("seed={s}"));
    }
    if let Some(n) = common.shots {
        extra.push(format!("shots={n}"));
    }
    extra
}

fn load_config(path: &Path, common: &Common) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(CONFIG_ERROR, format!("{}: {e}", path.display())))?;
    let o = overrides(common, Vec::new());
    if o.is_empty() { parse_config_str(&text, path.parent()) } else { apply_overrides(&text, &o, path.parent()) }
        .map_err(config_failure)
}

fn format_of(common: &Common, cfg: Option<&ExperimentConfig>) -> Result<OutputFormat, Failure> {
    match &common.format {
        Some(f) => f.parse().map_err(config_failure),
        None => Ok(cfg.map_or(OutputFormat::KeyValue, |c| c.output.format)),
    }
}

fn out_dir(common: &Common, cfg: Option<&ExperimentConfig>) -> PathBuf {
    common
        .out_dir
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn finish(report: &CampaignReport, common: &Common, cfg: Option<&ExperimentConfig>) -> Result<(), Failure> {
    let format = format_of(common, cfg)?;
    let dir = out_dir(common, cfg);
    let files = emit_outputs(report, &dir, format).map_err(runtime_failure)?;
    match format {
        OutputFormat::KeyValue => print!("{}", report.to_text()),
        OutputFormat::Json => print!("{}", report.to_json()),
    }
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    if let Some(p) = &report.partial {
        return Err(Failure(RUNTIME_ERROR, format!("run incomplete: {p}")));
    }
    if common.check {
        for c in &report.checks {
            eprintln!(
                "{} {}: {} in [{}, {}]",
                if c.pass() { "PASS" } else { "FAIL" },
                c.name,
                dipolar::format::float(c.value),
                dipolar::format::float(c.lo),
                dipolar::format::float(c.hi)
            );
        }
        if !report.all_checks_pass() {
            return Err(Failure(BAND_MISS, "acceptance band missed".into()));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure(CONFIG_ERROR, format!("--threads: {e}")))?;
    }
    let common = &cli.common;
    format_of(common, None)?;
    match cli.command {
        Command::Simulate { config } => {
            let cfg = load_config(&config, common)?;
            let report = simulate(&cfg).map_err(runtime_failure)?;
            finish(&report, common, Some(&cfg))
        }
        Command::Campaign { name, overrides: extra } => {
            let cfg = preset_config(&name, &overrides(common, extra)).map_err(config_failure)?;
            let report = run_campaign(&name, &cfg).map_err(|e| match e {
                Error::Config(_) => config_failure(e),
                e => runtime_failure(e),
            })?;
            finish(&report, common, Some(&cfg))
        }
        Command::Fit { records, config, bootstrap } => {
            let cfg = config.map(|p| load_config(&p, common)).transpose()?;
            let recs = read_records(&records).map_err(config_failure)?;
            let report = fit_records(&recs, cfg.as_ref().map(|c| &c.instrument), bootstrap).map_err(runtime_failure)?;
            finish(&report, common, None)
        }
        Command::Adev { records } => {
            let series = read_shot_series(&records).map_err(config_failure)?;
            let report = adev_report(&series).map_err(runtime_failure)?;
            finish(&report, common, None)
        }
        Command::Calibrate { table } => {
            let points = read_calibration_table(&table).map_err(config_failure)?;
            let report = calibration_report(&points).map_err(runtime_failure)?;
            finish(&report, common, None)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
