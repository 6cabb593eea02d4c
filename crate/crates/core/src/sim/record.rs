//! Outcome counts per sequence configuration, and their CSV form.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::float;
use crate::instrument::DetectionOutcome;
use crate::sim::sequence::Sign;

/// What the final populations measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Differential phase and π/2 analysis before detection.
    Parity,
    /// Direct population readout.
    Population,
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Readout::Parity => "parity",
            Readout::Population => "population",
        })
    }
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "parity" => Ok(Readout::Parity),
            "population" => Ok(Readout::Population),
            other => Err(Error::invalid("readout", format!("unknown kind {other:?}"))),
        }
    }
}

/// Configuration fingerprint of a record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordMeta {
    /// Free-evolution time (s).
    pub t: f64,
    /// Ion separation (m).
    pub d: f64,
    pub phi_parity: f64,
    /// Prepared state label (`ud`, `du`, `uu`, `dd`, `psi+`).
    pub init: String,
    pub init_sign: Sign,
    pub readout: Readout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub meta: RecordMeta,
    pub n_uu: u64,
    pub n_dd: u64,
    pub n_one: u64,
}

impl MeasurementRecord {
    pub fn empty(meta: RecordMeta) -> Self {
        Self { meta, n_uu: 0, n_dd: 0, n_one: 0 }
    }

    pub fn n(&self) -> u64 {
        self.n_uu + self.n_dd + self.n_one
    }

    pub fn counts(&self) -> [u64; 3] {
        [self.n_uu, self.n_dd, self.n_one]
    }

    pub fn add(&mut self, outcome: DetectionOutcome) {
        match outcome {
            DetectionOutcome::UU => self.n_uu += 1,
            DetectionOutcome::DD => self.n_dd += 1,
            DetectionOutcome::One => self.n_one += 1,
        }
    }

    pub fn add_counts(&mut self, counts: [u64; 3]) {
        self.n_uu += counts[0];
        self.n_dd += counts[1];
        self.n_one += counts[2];
    }

    /// Observed (P_UU, P_DD, P_ONE).
    pub fn frequencies(&self) -> Result<[f64; 3]> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InsufficientData("record has no shots".into()));
        }
        Ok(self.counts().map(|c| c as f64 / n as f64))
    }
}

const HEADER: [&str; 10] = ["t", "d", "phi_parity", "init", "init_sign", "readout", "n_uu", "n_dd", "n_one", "n"];

pub fn format_records(records: &[MeasurementRecord]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for r in records {
        let m = &r.meta;
        w.write_record([
            float(m.t),
            float(m.d),
            float(m.phi_parity),
            m.init.clone(),
            m.init_sign.to_string(),
            m.readout.to_string(),
            r.n_uu.to_string(),
            r.n_dd.to_string(),
            r.n_one.to_string(),
            r.n().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

#[derive(Debug, Deserialize)]
struct RecordRow {
    t: f64,
    d: f64,
    phi_parity: f64,
    init: String,
    init_sign: String,
    readout: String,
    n_uu: u64,
    n_dd: u64,
    n_one: u64,
    n: u64,
}

pub fn parse_records(text: &str) -> std::result::Result<Vec<MeasurementRecord>, String> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<RecordRow>().enumerate() {
        let row = row.map_err(|e| format!("row {}: {e}", i + 1))?;
        let bad = |e: Error| format!("row {}: {e}", i + 1);
        let record = MeasurementRecord {
            meta: RecordMeta {
                t: row.t,
                d: row.d,
                phi_parity: row.phi_parity,
                init: row.init,
                init_sign: row.init_sign.parse().map_err(bad)?,
                readout: row.readout.parse().map_err(bad)?,
            },
            n_uu: row.n_uu,
            n_dd: row.n_dd,
            n_one: row.n_one,
        };
        if record.n() != row.n {
            return Err(format!("row {}: counts sum to {} but n = {}", i + 1, record.n(), row.n));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<MeasurementRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text).map_err(|message| Error::Parse { path: path.to_path_buf(), message })
}

pub fn write_records(path: &Path, records: &[MeasurementRecord]) -> Result<()> {
    std::fs::write(path, format_records(records)).map_err(|e| Error::io(path, e))
}

/// Chronological per-shot outcomes, the input of the Allan-deviation analysis.
pub fn format_shot_series(series: &[(Sign, DetectionOutcome)]) -> String {
    let mut s = String::from("shot,init_sign,outcome\n");
    for (i, (sign, outcome)) in series.iter().enumerate() {
        s.push_str(&format!("{i},{sign},{outcome}\n"));
    }
    s
}

pub fn parse_shot_series(text: &str) -> std::result::Result<Vec<(Sign, DetectionOutcome)>, String> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| format!("row {}: {e}", i + 1))?;
        let field = |k: usize| row.get(k).ok_or_else(|| format!("row {}: missing column {k}", i + 1));
        let sign = field(1)?.parse().map_err(|e: Error| format!("row {}: {e}", i + 1))?;
        let outcome = field(2)?.parse().map_err(|e: Error| format!("row {}: {e}", i + 1))?;
        out.push((sign, outcome));
    }
    Ok(out)
}

pub fn read_shot_series(path: &Path) -> Result<Vec<(Sign, DetectionOutcome)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_shot_series(&text).map_err(|message| Error::Parse { path: path.to_path_buf(), message })
}
