//! Time series of `(t, E, I, K, mass, min v)` emitted by a flow run, with
//! optional stored density fields, and its CSV form.
//!
//! ```text
//! # flow: {"kind":"linear","p":1.5,...}
//! # config: {...}
//! # grid_hash: 9f2c...
//! # clamp_count: 0
//! t,E,I,K,mass,min_v
//! 0.0000000000000000e0,...
//! # field 0 1.0000000000000000e0 ...
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::FlowConfig;

pub const CSV_HEADER: &str = "t,E,I,K,mass,min_v";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub e: f64,
    pub i: f64,
    pub k: f64,
    pub mass: f64,
    pub min_v: f64,
}

/// Density snapshot attached to row `row`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredField {
    pub row: usize,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub flow: FlowConfig,
    /// Free-form echo of the configuration that produced the run.
    pub config: Option<serde_json::Value>,
    pub grid_hash: u64,
    pub rows: Vec<TraceRow>,
    pub fields: Vec<StoredField>,
    pub clamp_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    E,
    I,
    K,
}

impl Column {
    pub fn of(self, row: &TraceRow) -> f64 {
        match self {
            Column::E => row.e,
            Column::I => row.i,
            Column::K => row.k,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Column::E => "E",
            Column::I => "I",
            Column::K => "K",
        }
    }
}

impl std::str::FromStr for Column {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E" | "e" => Ok(Column::E),
            "I" | "i" => Ok(Column::I),
            "K" | "k" => Ok(Column::K),
            _ => Err(Error::Parameter(format!("unknown trace column {s:?}"))),
        }
    }
}

impl Trace {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, c: Column) -> Vec<f64> {
        self.rows.iter().map(|r| c.of(r)).collect()
    }

    /// Largest `|mass − mass₀|` over the run.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.rows.first().map_or(0.0, |r| r.mass);
        self.rows.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self, include_fields: bool) -> String {
        let mut out = String::new();
        let flow = serde_json::to_string(&self.flow).expect("flow config serializes");
        writeln!(out, "# flow: {flow}").unwrap();
        if let Some(c) = &self.config {
            writeln!(out, "# config: {c}").unwrap();
        }
        writeln!(out, "# grid_hash: {:016x}", self.grid_hash).unwrap();
        writeln!(out, "# clamp_count: {}", self.clamp_count).unwrap();
        writeln!(out, "{CSV_HEADER}").unwrap();
        for r in &self.rows {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", r.t, r.e, r.i, r.k, r.mass, r.min_v).unwrap();
        }
        if include_fields {
            for f in &self.fields {
                write!(out, "# field {}", f.row).unwrap();
                for v in &f.v {
                    write!(out, " {v:.16e}").unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::TraceFormat(format!("line {}: {msg}", line + 1));
        let mut flow = None;
        let mut config = None;
        let mut grid_hash = 0;
        let mut clamp_count = 0;
        let mut rows = Vec::new();
        let mut fields = Vec::new();
        let mut seen_header = false;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim_start();
                if let Some(j) = meta.strip_prefix("flow:") {
                    flow = Some(serde_json::from_str(j.trim()).map_err(|e| bad(ln, &e.to_string()))?);
                } else if let Some(j) = meta.strip_prefix("config:") {
                    config = Some(serde_json::from_str(j.trim()).map_err(|e| bad(ln, &e.to_string()))?);
                } else if let Some(h) = meta.strip_prefix("grid_hash:") {
                    grid_hash = u64::from_str_radix(h.trim(), 16).map_err(|e| bad(ln, &e.to_string()))?;
                } else if let Some(c) = meta.strip_prefix("clamp_count:") {
                    clamp_count = c.trim().parse().map_err(|_| bad(ln, "bad clamp count"))?;
                } else if let Some(f) = meta.strip_prefix("field") {
                    let mut it = f.split_whitespace();
                    let row = it.next().and_then(|r| r.parse().ok()).ok_or_else(|| bad(ln, "bad field row"))?;
                    let v = it.map(|x| x.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>();
                    fields.push(StoredField { row, v: v.map_err(|e| bad(ln, &e.to_string()))? });
                }
                continue;
            }
            if !seen_header {
                if line != CSV_HEADER {
                    return Err(bad(ln, &format!("expected header {CSV_HEADER:?}")));
                }
                seen_header = true;
                continue;
            }
            let vals = line.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>();
            let vals = vals.map_err(|e| bad(ln, &e.to_string()))?;
            if vals.len() != 6 {
                return Err(bad(ln, &format!("expected 6 columns, got {}", vals.len())));
            }
            rows.push(TraceRow { t: vals[0], e: vals[1], i: vals[2], k: vals[3], mass: vals[4], min_v: vals[5] });
        }
        if !seen_header {
            return Err(Error::TraceFormat("missing column header".into()));
        }
        if rows.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::TraceFormat("times are not strictly increasing".into()));
        }
        let flow = flow.ok_or_else(|| Error::TraceFormat("missing '# flow:' line".into()))?;
        Ok(Trace { flow, config, grid_hash, rows, fields, clamp_count })
    }
}
