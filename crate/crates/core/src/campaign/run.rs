//! Preset campaigns: a plan of independent cells, run in order, then analyzed.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::campaign::config::{apply_overrides, format_config, parse_config_str, ExperimentConfig, InitSpec};
use crate::campaign::report::{BandCheck, CampaignReport, Cell, Node, Provenance, Table};
use crate::error::{Error, Result};
use crate::inference::{
    adev_slope, allan_deviation, estimate_parity, fit_coherence_time, fit_coupling_from_fringe, fit_power_law,
    fit_visibility_vs_time, fringe_free_phase, log_tau_grid, parity_series, visibility_from_fringe, witness_estimate,
    FitResult, FringePoint,
};
use crate::instrument::{detection_contrast, fidelity_from_calibration, CalibrationClass, CalibrationPoint, DetectionOutcome};
use crate::sim::engine::{run_experiment, ShotConfig};
use crate::sim::record::{MeasurementRecord, Readout, RecordMeta};
use crate::sim::sequence::{PrepTarget, PulseSequence, SequenceBuilder, Sign, ANALYSIS_AXIS};
use crate::state::ProductState;

pub const PRESETS: [&str; 7] = ["fig2a", "fig2b", "fig2c", "fig3a", "fig3b", "fig3c", "fig4"];

pub fn preset_text(name: &str) -> Result<&'static str> {
    Ok(match name {
        "fig2a" => include_str!("presets/fig2a.toml"),
        "fig2b" => include_str!("presets/fig2b.toml"),
        "fig2c" => include_str!("presets/fig2c.toml"),
        "fig3a" => include_str!("presets/fig3a.toml"),
        "fig3b" => include_str!("presets/fig3b.toml"),
        "fig3c" => include_str!("presets/fig3c.toml"),
        "fig4" => include_str!("presets/fig4.toml"),
        other => {
            return Err(Error::Config(vec![format!("unknown campaign {other:?}; expected one of {}", PRESETS.join(", "))]))
        }
    })
}

pub fn preset_config(name: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = preset_text(name)?;
    if overrides.is_empty() {
        parse_config_str(text, None)
    } else {
        apply_overrides(text, overrides, None)
    }
}

/// What a cell measures, used to route its records into the analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Role {
    /// One phase point of a parity fringe at time `t`.
    Fringe { t: f64, phi: f64 },
    /// Population readout of a single configuration.
    Populations,
    /// Readout fidelity of a prepared uu or dd state at coordinate `x`.
    Calibration { x: f64, class: CalibrationClass },
    /// Parity at one (T, d) point.
    Sweep { t: f64, d: f64 },
    WitnessParity,
    WitnessPopulation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedCell {
    pub id: u64,
    pub role: Role,
    pub shot: ShotConfig,
    pub sequence: PulseSequence,
    pub shots: u64,
    pub interleave: bool,
    /// Expected parity contrast from detection and preparation errors.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub records: Vec<MeasurementRecord>,
    pub series: Vec<(Sign, DetectionOutcome)>,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(vec![msg.into()])
}

struct Planner<'a> {
    cfg: &'a ExperimentConfig,
    cells: Vec<PlannedCell>,
}

impl Planner<'_> {
    fn add(&mut self, role: Role, d: f64, t: f64, phi: f64, init: InitSpec, readout: Readout, shots: u64) -> Result<()> {
        let cfg = self.cfg;
        let shot = cfg.shot_config(d, t)?;
        let init_target = match init {
            InitSpec::Product(p) => PrepTarget::Product(p),
            InitSpec::PsiPlus => PrepTarget::Entangled { fidelity: cfg.instrument.entangled_fidelity },
        };
        let sequence = SequenceBuilder {
            t,
            f0: cfg.sequence.f0,
            phi_parity: phi,
            init_sign: Sign::Plus,
            init: init_target,
            echo: cfg.sequence.echo,
            analysis: (readout == Readout::Parity).then_some(ANALYSIS_AXIS),
        }
        .build()?;
        let prep = match init {
            InitSpec::Product(_) => 2.0 * cfg.instrument.model.prep_fidelity - 1.0,
            InitSpec::PsiPlus => 1.0,
        };
        let alpha = detection_contrast(&cfg.instrument.model, shot.detection_coordinate) * prep;
        // swapping the spins only matters for a DFS product state
        let interleave = cfg.sequence.interleave && matches!(init, InitSpec::Product(p) if p.in_dfs());
        self.cells.push(PlannedCell { id: self.cells.len() as u64, role, shot, sequence, shots, interleave, alpha });
        Ok(())
    }
}

/// The cells a campaign runs, in execution order. `simulate` runs the
/// configuration as written over its phase list.
pub fn plan(name: &str, cfg: &ExperimentConfig) -> Result<Vec<PlannedCell>> {
    let d0 = cfg.separation()?;
    let t0 = cfg.sequence.t;
    let phis = cfg.sequence.phi.values();
    let init = cfg.sequence.init;
    let n = cfg.shots;
    let mut p = Planner { cfg, cells: Vec::new() };
    let t_grid = || -> Result<&Vec<f64>> {
        if cfg.campaign.t_grid.is_empty() {
            Err(config_error(format!("{name}: campaign.t_grid is empty")))
        } else {
            Ok(&cfg.campaign.t_grid)
        }
    };
    let d_grid = || -> Result<&Vec<f64>> {
        if cfg.campaign.d_grid.is_empty() {
            Err(config_error(format!("{name}: campaign.d_grid is empty")))
        } else {
            Ok(&cfg.campaign.d_grid)
        }
    };
    let calibration = [(CalibrationClass::Up, ProductState::UpUp), (CalibrationClass::Down, ProductState::DownDown)];
    match name {
        "simulate" => match cfg.sequence.readout {
            Readout::Parity => {
                for &phi in &phis {
                    p.add(Role::Fringe { t: t0, phi }, d0, t0, phi, init, Readout::Parity, n)?;
                }
            }
            Readout::Population => p.add(Role::Populations, d0, t0, 0.0, init, Readout::Population, n)?,
        },
        "fig2a" => {
            for &t in t_grid()? {
                for (class, state) in calibration {
                    p.add(Role::Calibration { x: t, class }, d0, t, 0.0, InitSpec::Product(state), Readout::Population, n)?;
                }
            }
        }
        "fig2b" => {
            for &d in d_grid()? {
                for (class, state) in calibration {
                    let x = cfg.instrument.coordinate_value(t0, d);
                    p.add(Role::Calibration { x, class }, d, t0, 0.0, InitSpec::Product(state), Readout::Population, n)?;
                }
            }
        }
        "fig2c" => {
            for &t in t_grid()? {
                for &phi in &phis {
                    p.add(Role::Fringe { t, phi }, d0, t, phi, init, Readout::Parity, n)?;
                }
            }
        }
        "fig3a" | "fig3b" => {
            for &phi in &phis {
                p.add(Role::Fringe { t: t0, phi }, d0, t0, phi, init, Readout::Parity, n)?;
            }
            if name == "fig3b" {
                let w = cfg.campaign.witness_shots.unwrap_or(n);
                p.add(Role::WitnessParity, d0, t0, FRAC_PI_2, init, Readout::Parity, w)?;
                p.add(Role::WitnessPopulation, d0, t0, 0.0, init, Readout::Population, w)?;
            }
        }
        "fig3c" => {
            let phi = phis[0];
            for &t in t_grid()? {
                p.add(Role::Sweep { t, d: d0 }, d0, t, phi, init, Readout::Parity, n)?;
            }
        }
        "fig4" => {
            let phi = phis[0];
            for &d in d_grid()? {
                p.add(Role::Sweep { t: t0, d }, d, t0, phi, init, Readout::Parity, n)?;
            }
        }
        other => {
            return Err(config_error(format!("unknown campaign {other:?}; expected simulate or one of {}", PRESETS.join(", "))))
        }
    }
    Ok(p.cells)
}

pub fn run_cell(cell: &PlannedCell, seed: u64) -> Result<CellOutput> {
    let (records, series) = run_experiment(&cell.shot, &cell.sequence, cell.shots, cell.interleave, seed, cell.id)?;
    Ok(CellOutput { records, series })
}

/// Runs a campaign. Failures after planning yield a report marked partial
/// that keeps every record gathered so far.
pub fn run_campaign(name: &str, cfg: &ExperimentConfig) -> Result<CampaignReport> {
    let text = format_config(cfg);
    let cells = plan(name, cfg)?;
    let mut report = CampaignReport::new(name, Provenance::new(&text, cfg.seed));
    report.config = Some(text);
    let mut outputs = Vec::with_capacity(cells.len());
    for cell in &cells {
        match run_cell(cell, cfg.seed) {
            Ok(out) => {
                report.records.extend(out.records.iter().cloned());
                outputs.push(out);
            }
            Err(e) => {
                report.partial = Some(format!("cell {}: {e}", cell.id));
                return Ok(report);
            }
        }
    }
    if let Err(e) = analyze(name, cfg, &cells, &outputs, &mut report) {
        report.partial = Some(format!("analysis: {e}"));
    }
    Ok(report)
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<CampaignReport> {
    run_campaign("simulate", cfg)
}

fn xi_node(f: &FitResult) -> Node {
    let mut n = Node::from(f);
    n.set("xi_mhz", f.value("xi") / (2.0 * PI) * 1e3);
    n.set("xi_mhz_error", f.error("xi") / (2.0 * PI) * 1e3);
    n
}

fn mhz(xi: f64) -> f64 {
    xi / (2.0 * PI) * 1e3
}

/// Fringe points of the cells selected by `keep`, in plan order.
fn fringe(cells: &[PlannedCell], outputs: &[CellOutput], keep: impl Fn(&Role) -> bool) -> Result<Vec<(f64, FringePoint, u64)>> {
    let mut out = Vec::new();
    for (cell, o) in cells.iter().zip(outputs) {
        if let Role::Fringe { t, phi } = cell.role {
            if keep(&cell.role) {
                let e = estimate_parity(&o.records)?;
                out.push((t, FringePoint { phi, value: e.value, sigma: e.sigma }, e.n));
            }
        }
    }
    Ok(out)
}

fn fringe_table(points: &[(f64, FringePoint, u64)], with_t: bool) -> Table {
    let mut cols = vec!["phi_parity", "parity", "sigma", "N"];
    if with_t {
        cols.insert(0, "t");
    }
    let mut table = Table::new("fringe", &cols);
    for (t, p, n) in points {
        let mut row = vec![Cell::Float(p.phi), Cell::Float(p.value), Cell::Float(p.sigma), Cell::Int(*n)];
        if with_t {
            row.insert(0, Cell::Float(*t));
        }
        table.push(row);
    }
    table
}

/// Records of one cell folded into a single count record.
fn merged(records: &[MeasurementRecord]) -> Result<MeasurementRecord> {
    let first = records.first().ok_or_else(|| Error::InsufficientData("cell has no records".into()))?;
    let meta = RecordMeta { init_sign: Sign::Plus, ..first.meta.clone() };
    let mut r = MeasurementRecord::empty(meta);
    for rec in records {
        r.add_counts(rec.counts());
    }
    Ok(r)
}

fn analyze(
    name: &str,
    cfg: &ExperimentConfig,
    cells: &[PlannedCell],
    outputs: &[CellOutput],
    report: &mut CampaignReport,
) -> Result<()> {
    let est = &mut report.estimates;
    est.set("shots_per_point", cfg.shots);
    match name {
        "simulate" => {
            if cfg.sequence.readout == Readout::Population {
                let r = merged(&outputs[0].records)?;
                let f = r.frequencies()?;
                let mut t = Table::new("populations", &["class", "count", "fraction"]);
                for (o, (c, p)) in DetectionOutcome::ALL.iter().zip(r.counts().iter().zip(f)) {
                    t.push(vec![Cell::Text(o.label().into()), Cell::Int(*c), Cell::Float(p)]);
                }
                report.tables.push(t);
                est.set("p_uu_dd", f[0] + f[1]);
                est.set("n", r.n());
            } else {
                let pts = fringe(cells, outputs, |_| true)?;
                report.tables.push(fringe_table(&pts, false));
                est.set("alpha", cells[0].alpha);
                let fp: Vec<FringePoint> = pts.iter().map(|p| p.1).collect();
                if fp.len() >= 3 {
                    let fit = if cfg.sequence.init == InitSpec::PsiPlus {
                        fringe_free_phase(&fp)?
                    } else {
                        visibility_from_fringe(&fp)?
                    };
                    est.set("fringe", Node::from(&fit));
                    if let InitSpec::Product(p) = cfg.sequence.init {
                        if p.in_dfs() {
                            if let Ok(x) = fit_coupling_from_fringe(fit.value("amplitude"), fit.error("amplitude"), cells[0].alpha, cfg.sequence.t) {
                                est.set("coupling", xi_node(&x));
                            }
                        }
                    }
                } else if let [p] = fp.as_slice() {
                    est.set("parity", p.value).set("parity_sigma", p.sigma);
                }
            }
            let series: Vec<_> = outputs.iter().flat_map(|o| o.series.iter().copied()).collect();
            report.shots = Some(series);
        }
        "fig2a" | "fig2b" => {
            let mut t = Table::new("calibration", &["x", "class", "fidelity", "sigma", "N"]);
            let mut points = Vec::new();
            for (cell, o) in cells.iter().zip(outputs) {
                let Role::Calibration { x, class } = cell.role else { continue };
                let r = merged(&o.records)?;
                let own = match class {
                    CalibrationClass::Up => r.n_uu,
                    CalibrationClass::Down => r.n_dd,
                };
                // fraction of spins read in the prepared orientation
                let spins = 2.0 * r.n() as f64;
                let fid = (2 * own + r.n_one) as f64 / spins;
                points.push(CalibrationPoint { x, class, fidelity: fid });
                let label = match class {
                    CalibrationClass::Up => "UU",
                    CalibrationClass::Down => "DD",
                };
                t.push(vec![
                    Cell::Float(x),
                    Cell::Text(label.into()),
                    Cell::Float(fid),
                    Cell::Float((fid * (1.0 - fid) / spins).sqrt()),
                    Cell::Int(r.n()),
                ]);
            }
            report.tables.push(t);
            let curves = fidelity_from_calibration(&points)?;
            let mut c = Node::map();
            c.set("up_intercept", curves.up.intercept)
                .set("up_slope", curves.up.slope)
                .set("down_intercept", curves.down.intercept)
                .set("down_slope", curves.down.slope);
            let x_ref = cfg.instrument.coordinate_value(cfg.sequence.t, cfg.separation()?);
            c.set("alpha_at_reference", detection_contrast(&curves.apply_to(&cfg.instrument.model), x_ref));
            c.set("reference_x", x_ref);
            est.set("curves", c);
        }
        "fig2c" => {
            let pts = fringe(cells, outputs, |_| true)?;
            report.tables.push(fringe_table(&pts, true));
            let mut amps = Table::new("amplitudes", &["t", "amplitude", "sigma"]);
            let mut decay = Vec::new();
            let mut node = Node::map();
            for (k, &t) in cfg.campaign.t_grid.iter().enumerate() {
                let fp: Vec<FringePoint> = pts.iter().filter(|p| p.0 == t).map(|p| p.1).collect();
                let fit = fringe_free_phase(&fp)?;
                let (a, s) = (fit.value("amplitude"), fit.error("amplitude"));
                amps.push(vec![Cell::Float(t), Cell::Float(a), Cell::Float(s)]);
                decay.push((t, a, s));
                let mut f = Node::from(&fit);
                f.set("t", t);
                node.set(&format!("t{k}"), f);
            }
            report.tables.push(amps);
            est.set("fringes", node);
            let tau = fit_coherence_time(&decay)?;
            est.set("coherence", Node::from(&tau));
            let (first, last) = (decay[0], decay[decay.len() - 1]);
            report.checks.push(BandCheck::new("amplitude_short", first.1, 0.81, 0.10));
            report.checks.push(BandCheck::new("amplitude_long", last.1, 0.59, 0.08));
            report.checks.push(BandCheck::new("tau", tau.value("tau"), 44.0, 12.0));
        }
        "fig3a" | "fig3b" => {
            let pts = fringe(cells, outputs, |_| true)?;
            report.tables.push(fringe_table(&pts, false));
            let fp: Vec<FringePoint> = pts.iter().map(|p| p.1).collect();
            let fit = visibility_from_fringe(&fp)?;
            let alpha = cells[0].alpha;
            est.set("alpha", alpha);
            est.set("fringe", Node::from(&fit));
            let coupling = fit_coupling_from_fringe(fit.value("amplitude"), fit.error("amplitude"), alpha, cfg.sequence.t);
            match &coupling {
                Ok(x) => {
                    est.set("coupling", xi_node(x));
                }
                Err(e) => {
                    est.set("coupling", Node::map().set("error", e.to_string()).clone());
                }
            }
            if name == "fig3b" {
                report.checks.push(BandCheck::new("fringe_amplitude", fit.value("amplitude"), 0.24, 0.06));
                let xi = coupling.as_ref().map_or(f64::NAN, |x| mhz(x.value("xi")));
                report.checks.push(BandCheck::new("xi_mhz", xi, 0.9, 0.2));
                witness(cfg, cells, outputs, report)?;
            }
        }
        "fig3c" => {
            let mut t = Table::new("visibility", &["t", "parity", "sigma", "N", "alpha"]);
            let (mut pts, mut alphas) = (Vec::new(), Vec::new());
            for (cell, o) in cells.iter().zip(outputs) {
                let Role::Sweep { t: time, .. } = cell.role else { continue };
                let e = estimate_parity(&o.records)?;
                t.push(vec![Cell::Float(time), Cell::Float(e.value), Cell::Float(e.sigma), Cell::Int(e.n), Cell::Float(cell.alpha)]);
                pts.push((time, e.value, e.sigma));
                alphas.push(cell.alpha);
            }
            report.tables.push(t);
            let fit = fit_visibility_vs_time(&pts, &alphas)?;
            report.checks.push(BandCheck::range("xi_mhz", mhz(fit.value("xi")), 0.9, 1.3));
            report.estimates.set("coupling", xi_node(&fit));
        }
        "fig4" => {
            let mut t = Table::new("coupling", &["d", "parity", "sigma", "N", "alpha", "xi", "xi_sigma"]);
            let (mut pts, mut sig) = (Vec::new(), Vec::new());
            for (cell, o) in cells.iter().zip(outputs) {
                let Role::Sweep { d, .. } = cell.role else { continue };
                let e = estimate_parity(&o.records)?;
                let (xi, xs) = match fit_coupling_from_fringe(e.value, e.sigma, cell.alpha, cfg.sequence.t) {
                    Ok(f) => (f.value("xi"), f.error("xi")),
                    Err(_) => (f64::NAN, f64::NAN),
                };
                t.push(vec![
                    Cell::Float(d),
                    Cell::Float(e.value),
                    Cell::Float(e.sigma),
                    Cell::Int(e.n),
                    Cell::Float(cell.alpha),
                    Cell::Float(xi),
                    Cell::Float(xs),
                ]);
                if xi.is_finite() {
                    pts.push((d, xi));
                    sig.push(xs);
                }
            }
            report.tables.push(t);
            let fit = fit_power_law(&pts, Some(&sig))?;
            report.checks.push(BandCheck::new("n", fit.value("n"), 3.0, 0.4));
            report.estimates.set("power_law", Node::from(&fit));
        }
        _ => unreachable!("planned campaign"),
    }
    Ok(())
}

fn witness(cfg: &ExperimentConfig, cells: &[PlannedCell], outputs: &[CellOutput], report: &mut CampaignReport) -> Result<()> {
    let find = |role: Role| cells.iter().position(|c| c.role == role).ok_or_else(|| Error::InsufficientData("witness cell missing".into()));
    let ip = find(Role::WitnessParity)?;
    let iq = find(Role::WitnessPopulation)?;
    let v = estimate_parity(&outputs[ip].records)?;
    let pop = merged(&outputs[iq].records)?;
    let coord = cells[iq].shot.detection_coordinate;
    let model = &cfg.instrument.model;
    let alpha = detection_contrast(model, coord);
    let visibility = v.value.clamp(0.0, 1.0);
    let w = witness_estimate(&pop, visibility, v.sigma, &model.confusion_matrix(coord), alpha)?;
    let f = pop.frequencies()?;
    let mut n = Node::map();
    n.set("visibility", v.value)
        .set("visibility_sigma", v.sigma)
        .set("p_uu_dd", f[0] + f[1])
        .set("raw", w.raw)
        .set("sigma", w.sigma)
        .set("mle", w.mle_value)
        .set("mle_sigma", w.mle_sigma)
        .set("alpha", alpha)
        .set("boundary", w.boundary)
        .set("entangled", w.raw < 0.0)
        .set("shots", pop.n());
    report.estimates.set("witness", n);
    report.checks.push(BandCheck::new("witness_raw", w.raw, -0.16, 0.06));
    report.checks.push(BandCheck::new("witness_mle", w.mle_value, -0.41, 0.12));

    let series = parity_series(&outputs[ip].series);
    let taus = log_tau_grid(series.len() / 2, 5);
    let curve = allan_deviation(&series, &taus)?;
    let mut t = Table::new("adev", &["tau", "adev", "terms"]);
    for p in &curve {
        t.push(vec![Cell::Int(p.tau as u64), Cell::Float(p.adev), Cell::Int(p.terms as u64)]);
    }
    report.tables.push(t);
    report.estimates.set("adev", Node::from(&adev_slope(&curve)?));
    report.shots = Some(outputs[ip].series.clone());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_plans() {
        for name in PRESETS {
            let cfg = preset_config(name, &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            let cells = plan(name, &cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!cells.is_empty());
            assert!(cells.iter().enumerate().all(|(i, c)| c.id == i as u64));
        }
    }

    #[test]
    fn preset_shapes() {
        let c = preset_config("fig3b", &[]).unwrap();
        let cells = plan("fig3b", &c).unwrap();
        assert_eq!(cells.len(), 15);
        assert_eq!(cells[13].shots, 2388);
        assert!(cells[0].interleave);
        assert_eq!(plan("fig4", &preset_config("fig4", &[]).unwrap()).unwrap().len(), 5);
        assert_eq!(plan("fig2a", &preset_config("fig2a", &[]).unwrap()).unwrap().len(), 10);
        let c2 = preset_config("fig2c", &[]).unwrap();
        let cells = plan("fig2c", &c2).unwrap();
        assert_eq!(cells.len(), 26);
        assert!(!cells[0].interleave);
    }

    #[test]
    fn unknown_campaign_is_config_error() {
        assert!(matches!(preset_text("fig9"), Err(Error::Config(_))));
        let c = preset_config("fig3b", &[]).unwrap();
        assert!(matches!(plan("fig9", &c), Err(Error::Config(_))));
    }

    #[test]
    fn empty_grid_rejected() {
        let c = preset_config("fig4", &["campaign.d_grid=[]".into()]).unwrap();
        assert!(matches!(plan("fig4", &c), Err(Error::Config(_))));
    }

    #[test]
    fn short_campaign_is_deterministic() {
        let o = ["shots=6".into(), "noise.grad_rms=0.0".into(), "sequence.t=1.0".into(), "sequence.phi_points=5".into()];
        let cfg = preset_config("fig3a", &o).unwrap();
        let a = run_campaign("fig3a", &cfg).unwrap();
        let b = run_campaign("fig3a", &cfg).unwrap();
        assert!(a.partial.is_none(), "{:?}", a.partial);
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.iter().map(MeasurementRecord::n).sum::<u64>(), 30);
    }
}
