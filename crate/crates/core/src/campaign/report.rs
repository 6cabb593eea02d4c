//! Campaign reports and their on-disk forms.
//!
//! A report is written as
//! * `<name>_records.csv`: one row per measurement record,
//! * `<name>_<table>.csv`: one file per plot-ready table,
//! * `<name>_shots.csv`: chronological shot series, when kept,
//! * `<name>_report.txt` (nested `a.b.c = value` lines) or `<name>_report.json`.
//!
//! Floats carry 12 significant digits everywhere so that equal inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::campaign::config::OutputFormat;
use crate::error::{Error, Result};
use crate::format::float;
use crate::inference::FitResult;
use crate::instrument::DetectionOutcome;
use crate::sim::record::{format_records, format_shot_series, MeasurementRecord};
use crate::sim::sequence::Sign;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Map(Vec<(String, Node)>),
}

impl Node {
    pub fn map() -> Self {
        Node::Map(Vec::new())
    }

    /// Adds or replaces `key` in a map node.
    pub fn set(&mut self, key: &str, value: impl Into<Node>) -> &mut Self {
        if let Node::Map(entries) = self {
            let value = value.into();
            match entries.iter_mut().find(|(k, _)| k == key) {
                Some(e) => e.1 = value,
                None => entries.push((key.to_string(), value)),
            }
        }
        self
    }

    /// Looks up a dotted path.
    pub fn get(&self, path: &str) -> Option<&Node> {
        let mut node = self;
        for part in path.split('.') {
            let Node::Map(entries) = node else { return None };
            node = &entries.iter().find(|(k, _)| k == part)?.1;
        }
        Some(node)
    }

    pub fn float(&self, path: &str) -> Option<f64> {
        match self.get(path)? {
            Node::Float(v) => Some(*v),
            Node::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    fn flatten(&self, prefix: &str, out: &mut String) {
        match self {
            Node::Map(entries) => {
                for (k, v) in entries {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    v.flatten(&key, out);
                }
            }
            leaf => {
                let _ = writeln!(out, "{prefix} = {}", leaf.scalar_text());
            }
        }
    }

    fn scalar_text(&self) -> String {
        match self {
            Node::Float(v) => float(*v),
            Node::Int(v) => v.to_string(),
            Node::Text(s) => s.clone(),
            Node::Bool(b) => b.to_string(),
            Node::Map(_) => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Node::Float(v) if v.is_finite() => {
                let rounded: f64 = float(*v).parse().expect("formatted float parses");
                serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
            }
            Node::Float(v) => Value::String(float(*v)),
            Node::Int(v) => Value::from(*v),
            Node::Text(s) => Value::String(s.clone()),
            Node::Bool(b) => Value::Bool(*b),
            Node::Map(entries) => Value::Object(entries.iter().map(|(k, v)| (k.clone(), v.json())).collect::<Map<_, _>>()),
        }
    }
}

impl From<f64> for Node {
    fn from(v: f64) -> Self {
        Node::Float(v)
    }
}

impl From<u64> for Node {
    fn from(v: u64) -> Self {
        Node::Int(v)
    }
}

impl From<usize> for Node {
    fn from(v: usize) -> Self {
        Node::Int(v as u64)
    }
}

impl From<bool> for Node {
    fn from(v: bool) -> Self {
        Node::Bool(v)
    }
}

impl From<&str> for Node {
    fn from(v: &str) -> Self {
        Node::Text(v.to_string())
    }
}

impl From<String> for Node {
    fn from(v: String) -> Self {
        Node::Text(v)
    }
}

impl From<&FitResult> for Node {
    fn from(f: &FitResult) -> Self {
        let mut n = Node::map();
        for p in &f.parameters {
            n.set(&p.name, p.value);
            n.set(&format!("{}_error", p.name), p.error);
        }
        n.set("rss", f.rss);
        n.set("dof", f.dof);
        if !f.warnings.is_empty() {
            n.set("warnings", f.warnings.join("; "));
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Float(v) => float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(Cell::text).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

/// Acceptance band for one reported quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCheck {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl BandCheck {
    pub fn new(name: &str, value: f64, center: f64, half_width: f64) -> Self {
        Self { name: name.to_string(), value, lo: center - half_width, hi: center + half_width }
    }

    pub fn range(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.to_string(), value, lo, hi }
    }

    pub fn pass(&self) -> bool {
        self.value >= self.lo && self.value <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    /// SHA-256 of the normalized configuration text.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(config_text: &str, seed: u64) -> Self {
        let digest = Sha256::digest(config_text.as_bytes());
        let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self { config_hash, seed, version: env!("CARGO_PKG_VERSION").to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub name: String,
    pub records: Vec<MeasurementRecord>,
    pub tables: Vec<Table>,
    pub estimates: Node,
    pub checks: Vec<BandCheck>,
    pub provenance: Provenance,
    /// Reason the run stopped early; the records gathered so far are kept.
    pub partial: Option<String>,
    pub shots: Option<Vec<(Sign, DetectionOutcome)>>,
    /// Normalized configuration the run used.
    pub config: Option<String>,
}

impl CampaignReport {
    pub fn new(name: &str, provenance: Provenance) -> Self {
        Self {
            name: name.to_string(),
            records: Vec::new(),
            tables: Vec::new(),
            estimates: Node::map(),
            checks: Vec::new(),
            provenance,
            partial: None,
            shots: None,
            config: None,
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.partial.is_none() && self.checks.iter().all(BandCheck::pass)
    }

    fn file(&self, suffix: &str) -> String {
        format!("{}_{suffix}", self.name)
    }

    fn tree(&self) -> Node {
        let mut root = Node::map();
        root.set("campaign", self.name.as_str());
        root.set("status", if self.partial.is_some() { "partial" } else { "complete" });
        if let Some(p) = &self.partial {
            root.set("failure", p.as_str());
        }
        let mut prov = Node::map();
        prov.set("config_hash", self.provenance.config_hash.as_str())
            .set("seed", self.provenance.seed)
            .set("version", self.provenance.version.as_str());
        root.set("provenance", prov);
        let mut files = Node::map();
        if !self.records.is_empty() {
            files.set("records", self.file("records.csv"));
        }
        for t in &self.tables {
            files.set(&t.name, self.file(&format!("{}.csv", t.name)));
        }
        if self.shots.is_some() {
            files.set("shots", self.file("shots.csv"));
        }
        if self.config.is_some() {
            files.set("config", self.file("config.toml"));
        }
        root.set("files", files);
        root.set("estimates", self.estimates.clone());
        if !self.checks.is_empty() {
            let mut checks = Node::map();
            for c in &self.checks {
                let mut n = Node::map();
                n.set("value", c.value).set("lo", c.lo).set("hi", c.hi).set("pass", c.pass());
                checks.set(&c.name, n);
            }
            root.set("checks", checks);
        }
        root
    }

    /// Nested key/value text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.tree().flatten("", &mut s);
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.tree().json()).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Writes every file of the report into `dir`; returns the paths written.
pub fn emit_outputs(report: &CampaignReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(String, String)> = Vec::new();
    if !report.records.is_empty() {
        files.push((report.file("records.csv"), format_records(&report.records)));
    }
    for t in &report.tables {
        files.push((report.file(&format!("{}.csv", t.name)), t.to_csv()));
    }
    if let Some(series) = &report.shots {
        files.push((report.file("shots.csv"), format_shot_series(series)));
    }
    if let Some(cfg) = &report.config {
        files.push((report.file("config.toml"), cfg.clone()));
    }
    match format {
        OutputFormat::KeyValue => files.push((report.file("report.txt"), report.to_text())),
        OutputFormat::Json => files.push((report.file("report.json"), report.to_json())),
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
