//! Stand-alone analyses over files: record fits, Allan deviation, calibration.

use crate::campaign::config::InstrumentSpec;
use crate::campaign::report::{CampaignReport, Cell, Node, Provenance, Table};
use crate::error::{Error, Result};
use crate::inference::{
    adev_slope, allan_deviation, bootstrap_sigma, estimate_parity, fit_coupling_from_fringe, fit_power_law, fit_visibility_vs_time,
    fringe_free_phase, log_tau_grid, parity_series, visibility_from_fringe, FringePoint,
};
use crate::instrument::{detection_contrast, fidelity_from_calibration, CalibrationPoint, DetectionOutcome};
use crate::sim::record::{format_records, MeasurementRecord, Readout};
use crate::sim::sequence::Sign;
use crate::state::ProductState;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

struct Group {
    t: f64,
    d: f64,
    init: String,
    points: Vec<(FringePoint, u64, f64)>,
}

/// Parity contrast expected for records of initial state `init` at (t, d).
fn contrast(spec: Option<&InstrumentSpec>, init: &str, t: f64, d: f64) -> f64 {
    let Some(spec) = spec else { return 1.0 };
    let prep = match init.parse::<ProductState>() {
        Ok(p) if p.in_dfs() => 2.0 * spec.model.prep_fidelity - 1.0,
        _ => 1.0,
    };
    detection_contrast(&spec.model, spec.coordinate_value(t, d)) * prep
}

/// Fringe fits per (T, d) group of parity records, then ξ against T or d
/// when several groups are present. Contrasts come from `instrument` (or 1).
/// `bootstrap > 0` adds a resampled σ next to each projection-noise σ.
pub fn fit_records(records: &[MeasurementRecord], instrument: Option<&InstrumentSpec>, bootstrap: usize) -> Result<CampaignReport> {
    let parity: Vec<&MeasurementRecord> = records.iter().filter(|r| r.meta.readout == Readout::Parity).collect();
    if parity.is_empty() {
        return Err(Error::InsufficientData("no parity-readout records".into()));
    }
    let mut groups: Vec<Group> = Vec::new();
    for r in &parity {
        let g = match groups.iter_mut().position(|g| same(g.t, r.meta.t) && same(g.d, r.meta.d) && g.init == r.meta.init) {
            Some(i) => &mut groups[i],
            None => {
                groups.push(Group { t: r.meta.t, d: r.meta.d, init: r.meta.init.clone(), points: Vec::new() });
                groups.last_mut().expect("just pushed")
            }
        };
        if g.points.iter().any(|(p, _, _)| same(p.phi, r.meta.phi_parity)) {
            continue;
        }
        let cell: Vec<MeasurementRecord> = parity
            .iter()
            .filter(|q| same(q.meta.t, r.meta.t) && same(q.meta.d, r.meta.d) && q.meta.init == r.meta.init && same(q.meta.phi_parity, r.meta.phi_parity))
            .map(|q| (*q).clone())
            .collect();
        let e = estimate_parity(&cell)?;
        let boot = if bootstrap > 0 { bootstrap_sigma(&cell, bootstrap, g.points.len() as u64)? } else { f64::NAN };
        g.points.push((FringePoint { phi: r.meta.phi_parity, value: e.value, sigma: e.sigma }, e.n, boot));
    }

    let mut report = CampaignReport::new("fit", Provenance::new(&format_records(records), 0));
    let mut cols = vec!["t", "d", "init", "phi_parity", "parity", "sigma", "N"];
    if bootstrap > 0 {
        cols.push("bootstrap_sigma");
    }
    let mut fringe = Table::new("fringe", &cols);
    let mut summary = Table::new("groups", &["t", "d", "init", "amplitude", "sigma", "alpha", "xi", "xi_sigma"]);
    let mut per_group = Node::map();
    let mut xi_points = Vec::new();
    for (k, g) in groups.iter().enumerate() {
        for (p, n, boot) in &g.points {
            let mut row = vec![
                Cell::Float(g.t),
                Cell::Float(g.d),
                Cell::Text(g.init.clone()),
                Cell::Float(p.phi),
                Cell::Float(p.value),
                Cell::Float(p.sigma),
                Cell::Int(*n),
            ];
            if bootstrap > 0 {
                row.push(Cell::Float(*boot));
            }
            fringe.push(row);
        }
        let fp: Vec<FringePoint> = g.points.iter().map(|p| p.0).collect();
        let (amp, sig, node) = if fp.len() >= 3 {
            let fit = if g.init == "psi+" { fringe_free_phase(&fp)? } else { visibility_from_fringe(&fp)? };
            (fit.value("amplitude"), fit.error("amplitude"), Node::from(&fit))
        } else {
            // a single phase point is read as the amplitude at φ = π/2
            let p = fp[0];
            let s = p.phi.sin();
            let mut n = Node::map();
            n.set("amplitude", p.value / s).set("amplitude_error", p.sigma / s.abs());
            (p.value / s, p.sigma / s.abs(), n)
        };
        let alpha = contrast(instrument, &g.init, g.t, g.d);
        let mut node = node;
        node.set("t", g.t).set("d", g.d).set("init", g.init.as_str()).set("alpha", alpha);
        let (xi, xs) = match fit_coupling_from_fringe(amp, sig, alpha, g.t) {
            Ok(f) if g.init != "psi+" => (f.value("xi"), f.error("xi")),
            _ => (f64::NAN, f64::NAN),
        };
        node.set("xi", xi).set("xi_error", xs);
        if xi.is_finite() {
            xi_points.push((g.t, g.d, amp, sig, alpha, xi, xs));
        }
        per_group.set(&format!("group{k}"), node);
        summary.push(vec![
            Cell::Float(g.t),
            Cell::Float(g.d),
            Cell::Text(g.init.clone()),
            Cell::Float(amp),
            Cell::Float(sig),
            Cell::Float(alpha),
            Cell::Float(xi),
            Cell::Float(xs),
        ]);
    }
    report.tables.push(fringe);
    report.tables.push(summary);
    report.estimates.set("groups", per_group);

    let distinct = |f: fn(&(f64, f64, f64, f64, f64, f64, f64)) -> f64| {
        let mut v: Vec<f64> = xi_points.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| same(*a, *b));
        v.len()
    };
    if distinct(|p| p.1) >= 3 && distinct(|p| p.0) == 1 {
        let pts: Vec<(f64, f64)> = xi_points.iter().map(|p| (p.1, p.5)).collect();
        let sig: Vec<f64> = xi_points.iter().map(|p| p.6).collect();
        report.estimates.set("power_law", Node::from(&fit_power_law(&pts, Some(&sig))?));
    } else if distinct(|p| p.0) >= 2 && distinct(|p| p.1) == 1 {
        let pts: Vec<(f64, f64, f64)> = xi_points.iter().map(|p| (p.0, p.2, p.3)).collect();
        let alphas: Vec<f64> = xi_points.iter().map(|p| p.4).collect();
        let f = fit_visibility_vs_time(&pts, &alphas)?;
        let mut n = Node::from(&f);
        n.set("xi_mhz", f.value("xi") / (2.0 * std::f64::consts::PI) * 1e3);
        report.estimates.set("coupling_vs_time", n);
    }
    Ok(report)
}

/// Overlapping Allan deviation of a chronological shot series.
pub fn adev_report(series: &[(Sign, DetectionOutcome)]) -> Result<CampaignReport> {
    let x = parity_series(series);
    if x.len() < 4 {
        return Err(Error::InsufficientData(format!("{} shots is too few for an Allan deviation", x.len())));
    }
    let curve = allan_deviation(&x, &log_tau_grid(x.len() / 2, 5))?;
    let text = crate::sim::record::format_shot_series(series);
    let mut report = CampaignReport::new("adev", Provenance::new(&text, 0));
    let mut t = Table::new("adev", &["tau", "adev", "terms"]);
    for p in &curve {
        t.push(vec![Cell::Int(p.tau as u64), Cell::Float(p.adev), Cell::Int(p.terms as u64)]);
    }
    report.tables.push(t);
    report.estimates.set("shots", x.len());
    report.estimates.set("mean_parity", x.iter().sum::<f64>() / x.len() as f64);
    if curve.len() >= 2 {
        report.estimates.set("fit", Node::from(&adev_slope(&curve)?));
    }
    Ok(report)
}

/// Linear detection-fidelity curves and the resulting contrast α at each
/// calibrated coordinate.
pub fn calibration_report(points: &[CalibrationPoint]) -> Result<CampaignReport> {
    let curves = fidelity_from_calibration(points)?;
    let text = crate::instrument::format_calibration_table(points);
    let mut report = CampaignReport::new("calibrate", Provenance::new(&text, 0));
    let mut c = Node::map();
    c.set("up_intercept", curves.up.intercept)
        .set("up_slope", curves.up.slope)
        .set("down_intercept", curves.down.intercept)
        .set("down_slope", curves.down.slope);
    report.estimates.set("curves", c);
    let model = curves.apply_to(&crate::instrument::InstrumentModel::ideal());
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut t = Table::new("contrast", &["x", "d_up", "d_down", "alpha"]);
    for x in xs {
        let (u, d) = model.fidelities(x);
        t.push(vec![Cell::Float(x), Cell::Float(u), Cell::Float(d), Cell::Float(detection_contrast(&model, x))]);
    }
    report.tables.push(t);
    Ok(report)
}
