//! Declarative experiment configuration (TOML).
//!
//! ```toml
//! seed = 7                     # 0 ..= 2^63 - 1 (TOML integer range)
//! shots = 500
//! dt = 1e-3                    # optional, propagation slice (s)
//!
//! [geometry]                   # exactly one of d (m) or f_trap (Hz)
//! d = 2.4e-6
//!
//! [field]
//! b0 = 0.44e-3                 # T
//! grad = 3e-7                  # static gradient, T/m
//!
//! [noise]
//! collective_rms = 1e-7        # T
//! collective_corr_time = 0.01  # s
//! grad_rms = 1e-6              # T/m
//! grad_corr_time = 0.01        # s
//!
//! [instrument]
//! prep_fidelity = 0.99
//! entangled_fidelity = 0.95
//! pi_pulse_duration = 1e-5
//! pulse_error = 0.0
//! coordinate = "time"          # detection curves keyed by T (s) or "distance" (µm)
//! d_up = { intercept = 0.99, slope = -0.0045 }
//! d_down = { intercept = 0.97, slope = -0.0045 }
//! # calibration = "table.csv"  # alternative to d_up/d_down
//!
//! [sequence]
//! t = 15.0                     # s
//! f0 = 2.0                     # Hz
//! echo = true
//! phi_points = 13              # or phi_parity = [..]
//! interleave = true
//! init = "ud"                  # ud, du, uu, dd, psi+
//! readout = "parity"           # or population
//!
//! [campaign]                   # grids used by the presets
//! t_grid = [1.0, 15.0]
//! d_grid = [2.2e-6, 3.0e-6]
//! witness_shots = 2388
//!
//! [output]
//! dir = "out"
//! format = "kv"                # or json
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::instrument::{fidelity_from_calibration, read_calibration_table, DetectionCurve, InstrumentModel};
use crate::noise::NoiseConfig;
use crate::physics::{coupling_strength, ion_separation, FieldConfig};
use crate::sim::engine::ShotConfig;
use crate::sim::record::Readout;
use crate::state::ProductState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometrySpec {
    Separation(f64),
    TrapFrequency(f64),
}

impl GeometrySpec {
    pub fn separation(&self) -> Result<f64> {
        match *self {
            GeometrySpec::Separation(d) => Ok(d),
            GeometrySpec::TrapFrequency(f) => ion_separation(f),
        }
    }
}

/// Which coordinate the detection curves are keyed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    /// Experiment time T (s).
    Time,
    /// Ion separation (µm).
    Distance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentSpec {
    pub model: InstrumentModel,
    pub entangled_fidelity: f64,
    pub coordinate: Coordinate,
    /// Calibration table the curves were fitted from, as written in the file.
    pub calibration: Option<String>,
}

impl InstrumentSpec {
    /// Detection-curve coordinate for a shot at time `t` and separation `d` (m).
    pub fn coordinate_value(&self, t: f64, d: f64) -> f64 {
        match self.coordinate {
            Coordinate::Time => t,
            Coordinate::Distance => d * 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhiGrid {
    /// Evenly spaced over [−π, π], endpoints included.
    Points(usize),
    Values(Vec<f64>),
}

impl PhiGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            PhiGrid::Points(1) => vec![PI / 2.0],
            PhiGrid::Points(n) => (0..*n).map(|i| -PI + 2.0 * PI * i as f64 / (*n - 1) as f64).collect(),
            PhiGrid::Values(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitSpec {
    Product(ProductState),
    PsiPlus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub t: f64,
    pub f0: f64,
    pub echo: bool,
    pub phi: PhiGrid,
    pub interleave: bool,
    pub init: InitSpec,
    pub readout: Readout,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CampaignSpec {
    pub t_grid: Vec<f64>,
    pub d_grid: Vec<f64>,
    pub witness_shots: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    KeyValue,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kv" | "text" => Ok(OutputFormat::KeyValue),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid("format", format!("expected kv or json, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub shots: u64,
    pub dt: f64,
    pub geometry: GeometrySpec,
    pub field: FieldConfig,
    /// `grad_static` mirrors `field.grad`.
    pub noise: NoiseConfig,
    pub instrument: InstrumentSpec,
    pub sequence: SequenceSpec,
    pub campaign: CampaignSpec,
    pub output: OutputSpec,
}

pub const DEFAULT_DT: f64 = 1e-3;

impl ExperimentConfig {
    pub fn separation(&self) -> Result<f64> {
        self.geometry.separation()
    }

    /// Shot parameters at separation `d` (m) and free-evolution time `t` (s).
    pub fn shot_config(&self, d: f64, t: f64) -> Result<ShotConfig> {
        Ok(ShotConfig {
            xi: coupling_strength(d)?,
            separation: d,
            noise: NoiseConfig { grad_static: self.field.grad, ..self.noise },
            instrument: self.instrument.model,
            detection_coordinate: self.instrument.coordinate_value(t, d),
            dt: self.dt,
        })
    }
}

struct Reader<'a> {
    errors: Vec<String>,
    base: Option<&'a Path>,
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

impl Reader<'_> {
    fn section<'t>(&mut self, root: &'t Table, name: &str, known: &[&str]) -> Option<&'t Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => {
                self.unknown(t, name, known);
                Some(t)
            }
            Some(v) => {
                self.errors.push(format!("{name}: expected a table, found {}", type_name(v)));
                None
            }
        }
    }

    fn unknown(&mut self, t: &Table, path: &str, known: &[&str]) {
        for k in t.keys() {
            if !known.contains(&k.as_str()) {
                let full = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                self.errors.push(format!("unknown key {full:?}"));
            }
        }
    }

    fn float(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<f64> {
        match t?.get(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            v => {
                self.errors.push(format!("{}: expected a number, found {}", join(path, key), type_name(v)));
                None
            }
        }
    }

    fn float_or(&mut self, t: Option<&Table>, path: &str, key: &str, default: f64) -> f64 {
        self.float(t, path, key).unwrap_or(default)
    }

    fn uint(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<u64> {
        match t?.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            v => {
                self.errors.push(format!("{}: expected a non-negative integer, found {v}", join(path, key)));
                None
            }
        }
    }

    fn boolean(&mut self, t: Option<&Table>, path: &str, key: &str, default: bool) -> bool {
        match t.and_then(|t| t.get(key)) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                self.errors.push(format!("{}: expected true or false, found {}", join(path, key), type_name(v)));
                default
            }
        }
    }

    fn string(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<String> {
        match t?.get(key)? {
            Value::String(s) => Some(s.clone()),
            v => {
                self.errors.push(format!("{}: expected a string, found {}", join(path, key), type_name(v)));
                None
            }
        }
    }

    fn floats(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<Vec<f64>> {
        match t?.get(key)? {
            Value::Array(a) => {
                let mut out = Vec::with_capacity(a.len());
                for v in a {
                    match v {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(i) => out.push(*i as f64),
                        other => {
                            self.errors.push(format!("{}: expected numbers, found {}", join(path, key), type_name(other)));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            v => {
                self.errors.push(format!("{}: expected an array, found {}", join(path, key), type_name(v)));
                None
            }
        }
    }

    fn curve(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<DetectionCurve> {
        let full = join(path, key);
        match t?.get(key)? {
            Value::Table(c) => {
                self.unknown(c, &full, &["intercept", "slope"]);
                let intercept = self.float(Some(c), &full, "intercept");
                if intercept.is_none() && !c.contains_key("intercept") {
                    self.errors.push(format!("missing required key {full}.intercept"));
                }
                let slope = self.float_or(Some(c), &full, "slope", 0.0);
                intercept.map(|intercept| DetectionCurve { intercept, slope })
            }
            Value::Float(f) => Some(DetectionCurve::constant(*f)),
            v => {
                self.errors.push(format!("{full}: expected a number or {{ intercept, slope }}, found {}", type_name(v)));
                None
            }
        }
    }

    fn require<T>(&mut self, v: Option<T>, t: Option<&Table>, path: &str, key: &str) -> Option<T> {
        if v.is_none() && !t.is_some_and(|t| t.contains_key(key)) {
            self.errors.push(format!("missing required key {}", join(path, key)));
        }
        v
    }

    fn check(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.errors.push(message());
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path.parent())
}

/// Parses and validates a configuration; relative calibration paths resolve against `base`.
pub fn parse_config_str(text: &str, base: Option<&Path>) -> Result<ExperimentConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    config_from_table(&root, base)
}

pub fn config_from_table(root: &Table, base: Option<&Path>) -> Result<ExperimentConfig> {
    let mut r = Reader { errors: Vec::new(), base };
    r.unknown(
        root,
        "",
        &["seed", "shots", "dt", "geometry", "field", "noise", "instrument", "sequence", "campaign", "output"],
    );
    let seed = r.uint(Some(root), "", "seed");
    let seed = r.require(seed, Some(root), "", "seed");
    let shots = r.uint(Some(root), "", "shots");
    let shots = r.require(shots, Some(root), "", "shots");
    let dt = r.float_or(Some(root), "", "dt", DEFAULT_DT);
    r.check(dt > 0.0, || format!("dt: must be positive, got {dt}"));
    if let Some(0) = shots {
        r.errors.push("shots: must be at least 1".into());
    }

    let geo = r.section(root, "geometry", &["d", "f_trap"]);
    if geo.is_none() && !root.contains_key("geometry") {
        r.errors.push("missing required section geometry (d or f_trap)".into());
    }
    let d = r.float(geo, "geometry", "d");
    let f_trap = r.float(geo, "geometry", "f_trap");
    let geometry = match (d, f_trap) {
        (Some(d), None) => {
            r.check(d > 0.0, || format!("geometry.d: must be positive, got {d}"));
            Some(GeometrySpec::Separation(d))
        }
        (None, Some(f)) => {
            r.check(f > 0.0, || format!("geometry.f_trap: must be positive, got {f}"));
            Some(GeometrySpec::TrapFrequency(f))
        }
        (Some(_), Some(_)) => {
            r.errors.push("geometry: give either d or f_trap, not both".into());
            None
        }
        (None, None) => {
            if geo.is_some() {
                r.errors.push("geometry: missing d or f_trap".into());
            }
            None
        }
    };

    let fs = r.section(root, "field", &["b0", "grad"]);
    let field = FieldConfig { b0: r.float_or(fs, "field", "b0", 0.44e-3), grad: r.float_or(fs, "field", "grad", 0.0) };
    r.check(field.b0 >= 0.0, || format!("field.b0: must be non-negative, got {}", field.b0));

    let ns = r.section(root, "noise", &["collective_rms", "collective_corr_time", "grad_rms", "grad_corr_time"]);
    let dn = NoiseConfig::default();
    let noise = NoiseConfig {
        collective_rms: r.float_or(ns, "noise", "collective_rms", dn.collective_rms),
        collective_corr_time: r.float_or(ns, "noise", "collective_corr_time", dn.collective_corr_time),
        grad_static: field.grad,
        grad_rms: r.float_or(ns, "noise", "grad_rms", dn.grad_rms),
        grad_corr_time: r.float_or(ns, "noise", "grad_corr_time", dn.grad_corr_time),
    };
    if let Err(e) = noise.validate() {
        r.errors.push(format!("noise: {e}"));
    } else if dt > noise.max_dt() {
        r.errors.push(format!("dt = {dt} s does not resolve the noise (limit {} s)", noise.max_dt()));
    }

    let is = r.section(
        root,
        "instrument",
        &["prep_fidelity", "entangled_fidelity", "pi_pulse_duration", "pulse_error", "coordinate", "d_up", "d_down", "calibration"],
    );
    let ideal = InstrumentModel::ideal();
    let coordinate = match r.string(is, "instrument", "coordinate").as_deref() {
        None | Some("time") => Coordinate::Time,
        Some("distance") => Coordinate::Distance,
        Some(other) => {
            r.errors.push(format!("instrument.coordinate: expected time or distance, got {other:?}"));
            Coordinate::Time
        }
    };
    let calibration = r.string(is, "instrument", "calibration");
    let d_up = r.curve(is, "instrument", "d_up");
    let d_down = r.curve(is, "instrument", "d_down");
    let (d_up, d_down) = match (&calibration, d_up, d_down) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            r.errors.push("instrument: calibration and d_up/d_down are mutually exclusive".into());
            (ideal.d_up, ideal.d_down)
        }
        (Some(file), None, None) => {
            let p = Path::new(file);
            let full = match r.base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p.to_path_buf(),
            };
            match read_calibration_table(&full).and_then(|pts| fidelity_from_calibration(&pts)) {
                Ok(c) => (c.up, c.down),
                Err(e) => {
                    r.errors.push(format!("instrument.calibration: {e}"));
                    (ideal.d_up, ideal.d_down)
                }
            }
        }
        (None, up, down) => (up.unwrap_or(ideal.d_up), down.unwrap_or(ideal.d_down)),
    };
    let model = InstrumentModel {
        prep_fidelity: r.float_or(is, "instrument", "prep_fidelity", 1.0),
        d_up,
        d_down,
        pi_pulse_duration: r.float_or(is, "instrument", "pi_pulse_duration", ideal.pi_pulse_duration),
        pulse_error: r.float_or(is, "instrument", "pulse_error", 0.0),
    };
    if let Err(e) = model.validate() {
        r.errors.push(format!("instrument: {e}"));
    }
    let entangled_fidelity = r.float_or(is, "instrument", "entangled_fidelity", 1.0);
    r.check((0.0..=1.0).contains(&entangled_fidelity), || {
        format!("instrument.entangled_fidelity: {entangled_fidelity} is not a probability")
    });

    let ss = r.section(root, "sequence", &["t", "f0", "echo", "phi_points", "phi_parity", "interleave", "init", "readout"]);
    if ss.is_none() && !root.contains_key("sequence") {
        r.errors.push("missing required section sequence".into());
    }
    let t = r.float(ss, "sequence", "t");
    let t = if ss.is_some() { r.require(t, ss, "sequence", "t") } else { t };
    if let Some(t) = t {
        r.check(t > 0.0, || format!("sequence.t: must be positive, got {t}"));
    }
    let f0 = r.float_or(ss, "sequence", "f0", 2.0);
    r.check(f0 > 0.0, || format!("sequence.f0: must be positive, got {f0}"));
    let echo = r.boolean(ss, "sequence", "echo", true);
    let points = r.uint(ss, "sequence", "phi_points");
    let values = r.floats(ss, "sequence", "phi_parity");
    let phi = match (points, values) {
        (Some(_), Some(_)) => {
            r.errors.push("sequence: give either phi_points or phi_parity, not both".into());
            PhiGrid::Points(1)
        }
        (Some(0), None) => {
            r.errors.push("sequence.phi_points: must be at least 1".into());
            PhiGrid::Points(1)
        }
        (Some(n), None) => PhiGrid::Points(n as usize),
        (None, Some(v)) if v.is_empty() => {
            r.errors.push("sequence.phi_parity: empty".into());
            PhiGrid::Points(1)
        }
        (None, Some(v)) => PhiGrid::Values(v),
        (None, None) => PhiGrid::Points(1),
    };
    let interleave = r.boolean(ss, "sequence", "interleave", true);
    let init = match r.string(ss, "sequence", "init").as_deref() {
        None => InitSpec::Product(ProductState::UpDown),
        Some("psi+") => InitSpec::PsiPlus,
        Some(s) => match s.parse() {
            Ok(p) => InitSpec::Product(p),
            Err(_) => {
                r.errors.push(format!("sequence.init: expected ud, du, uu, dd or psi+, got {s:?}"));
                InitSpec::Product(ProductState::UpDown)
            }
        },
    };
    let readout = match r.string(ss, "sequence", "readout").as_deref() {
        None => Readout::Parity,
        Some(s) => s.parse().unwrap_or_else(|_| {
            r.errors.push(format!("sequence.readout: expected parity or population, got {s:?}"));
            Readout::Parity
        }),
    };

    let cs = r.section(root, "campaign", &["t_grid", "d_grid", "witness_shots"]);
    let campaign = CampaignSpec {
        t_grid: r.floats(cs, "campaign", "t_grid").unwrap_or_default(),
        d_grid: r.floats(cs, "campaign", "d_grid").unwrap_or_default(),
        witness_shots: r.uint(cs, "campaign", "witness_shots"),
    };
    r.check(campaign.t_grid.iter().all(|&t| t > 0.0), || "campaign.t_grid: times must be positive".into());
    r.check(campaign.d_grid.iter().all(|&d| d > 0.0), || "campaign.d_grid: distances must be positive".into());

    let os = r.section(root, "output", &["dir", "format"]);
    let output = OutputSpec {
        dir: r.string(os, "output", "dir").map(PathBuf::from),
        format: match r.string(os, "output", "format") {
            None => OutputFormat::KeyValue,
            Some(s) => s.parse().unwrap_or_else(|e: Error| {
                r.errors.push(format!("output.format: {e}"));
                OutputFormat::KeyValue
            }),
        },
    };

    if !r.errors.is_empty() {
        return Err(Error::Config(r.errors));
    }
    let (Some(seed), Some(shots), Some(geometry), Some(t)) = (seed, shots, geometry, t) else {
        return Err(Error::Config(vec!["incomplete configuration".into()]));
    };
    Ok(ExperimentConfig {
        seed,
        shots,
        dt,
        geometry,
        field,
        noise,
        instrument: InstrumentSpec { model, entangled_fidelity, coordinate, calibration },
        sequence: SequenceSpec { t, f0, echo, phi, interleave, init, readout },
        campaign,
        output,
    })
}

/// Applies dotted `key=value` overrides (value in TOML syntax; bare words are strings).
pub fn apply_overrides(text: &str, overrides: &[String], base: Option<&Path>) -> Result<ExperimentConfig> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let mut errors = Vec::new();
    for o in overrides {
        let Some((key, raw)) = o.split_once('=') else {
            errors.push(format!("override {o:?}: expected key=value"));
            continue;
        };
        let key = key.trim();
        let raw = raw.trim();
        let value = match format!("v = {raw}").parse::<Table>() {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => Value::String(raw.to_string()),
        };
        let parts: Vec<&str> = key.split('.').collect();
        if let Err(e) = insert_path(&mut root, &parts, value) {
            errors.push(format!("override {key:?}: {e}"));
        }
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    config_from_table(&root, base)
}

fn insert_path(table: &mut Table, parts: &[&str], value: Value) -> std::result::Result<(), String> {
    match parts {
        [] => Err("empty key".into()),
        [leaf] => {
            table.insert(leaf.to_string(), value);
            Ok(())
        }
        [section, rest @ ..] => {
            let entry = table.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
            let Value::Table(t) = entry else { return Err(format!("{section} is not a section")) };
            // keep mutually exclusive keys from clashing with the new value
            let exclusive: &[&str] = match (*section, rest) {
                ("geometry", [_]) => &["d", "f_trap"],
                ("sequence", ["phi_points" | "phi_parity"]) => &["phi_points", "phi_parity"],
                ("instrument", ["calibration"]) => &["d_up", "d_down"],
                ("instrument", ["d_up" | "d_down"]) => &["calibration"],
                _ => &[],
            };
            for k in exclusive {
                t.remove(*k);
            }
            insert_path(t, rest, value)
        }
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn list(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", "))
}

fn quoted(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

/// Writes a configuration back out; `parse_config_str(format_config(c))` returns `c`.
pub fn format_config(c: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seed = {}\nshots = {}\ndt = {}\n", c.seed, c.shots, num(c.dt));
    let _ = match c.geometry {
        GeometrySpec::Separation(d) => writeln!(s, "[geometry]\nd = {}\n", num(d)),
        GeometrySpec::TrapFrequency(f) => writeln!(s, "[geometry]\nf_trap = {}\n", num(f)),
    };
    let _ = writeln!(s, "[field]\nb0 = {}\ngrad = {}\n", num(c.field.b0), num(c.field.grad));
    let n = &c.noise;
    let _ = writeln!(
        s,
        "[noise]\ncollective_rms = {}\ncollective_corr_time = {}\ngrad_rms = {}\ngrad_corr_time = {}\n",
        num(n.collective_rms),
        num(n.collective_corr_time),
        num(n.grad_rms),
        num(n.grad_corr_time)
    );
    let i = &c.instrument;
    let m = &i.model;
    let _ = writeln!(
        s,
        "[instrument]\nprep_fidelity = {}\nentangled_fidelity = {}\npi_pulse_duration = {}\npulse_error = {}\ncoordinate = {}",
        num(m.prep_fidelity),
        num(i.entangled_fidelity),
        num(m.pi_pulse_duration),
        num(m.pulse_error),
        quoted(match i.coordinate {
            Coordinate::Time => "time",
            Coordinate::Distance => "distance",
        })
    );
    match &i.calibration {
        Some(file) => {
            let _ = writeln!(s, "calibration = {}\n", quoted(file));
        }
        None => {
            let _ = writeln!(
                s,
                "d_up = {{ intercept = {}, slope = {} }}\nd_down = {{ intercept = {}, slope = {} }}\n",
                num(m.d_up.intercept),
                num(m.d_up.slope),
                num(m.d_down.intercept),
                num(m.d_down.slope)
            );
        }
    }
    let q = &c.sequence;
    let _ = writeln!(s, "[sequence]\nt = {}\nf0 = {}\necho = {}", num(q.t), num(q.f0), q.echo);
    let _ = match &q.phi {
        PhiGrid::Points(n) => writeln!(s, "phi_points = {n}"),
        PhiGrid::Values(v) => writeln!(s, "phi_parity = {}", list(v)),
    };
    let init = match q.init {
        InitSpec::Product(p) => p.label().to_string(),
        InitSpec::PsiPlus => "psi+".into(),
    };
    let _ = writeln!(s, "interleave = {}\ninit = {}\nreadout = {}\n", q.interleave, quoted(&init), quoted(&q.readout.to_string()));
    let cp = &c.campaign;
    let _ = writeln!(s, "[campaign]\nt_grid = {}\nd_grid = {}", list(&cp.t_grid), list(&cp.d_grid));
    if let Some(w) = cp.witness_shots {
        let _ = writeln!(s, "witness_shots = {w}");
    }
    let _ = writeln!(s, "\n[output]\nformat = {}", quoted(match c.output.format {
        OutputFormat::KeyValue => "kv",
        OutputFormat::Json => "json",
    }));
    if let Some(dir) = &c.output.dir {
        let _ = writeln!(s, "dir = {}", quoted(&dir.to_string_lossy()));
    }
    s
}
