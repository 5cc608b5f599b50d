//! Trace CSV and run summary files.
//!
//! Trace columns are fixed: `iter,mse_train,mse_test,consensus_residual,
//! optimality_residual,cum_transmissions`. Reals are written in shortest
//! round-trip scientific notation; absent values are `NA`.

use std::path::Path;

use coke_core::{RunTrace, TraceRow};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const TRACE_HEADER: [&str; 6] = [
    "iter",
    "mse_train",
    "mse_test",
    "consensus_residual",
    "optimality_residual",
    "cum_transmissions",
];

/// Version of the trace, summary, dataset and edge-list formats.
pub const FORMAT_VERSION: u32 = 1;

const NA: &str = "NA";

fn real(v: f64) -> String {
    format!("{v:e}")
}

fn opt_real(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), real)
}

pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let io = |e: csv::Error| SimError::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(TRACE_HEADER).map_err(io)?;
    for r in trace.rows() {
        w.write_record([
            r.iteration.to_string(),
            real(r.mse_train),
            opt_real(r.mse_test),
            real(r.consensus_residual),
            opt_real(r.optimality_residual),
            r.cumulative_transmissions.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

/// One parsed trace line.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub mse_train: f64,
    pub mse_test: Option<f64>,
    pub consensus_residual: f64,
    pub optimality_residual: Option<f64>,
    pub cumulative_transmissions: u64,
}

impl From<&TraceRow> for TraceRecord {
    fn from(r: &TraceRow) -> Self {
        TraceRecord {
            iteration: r.iteration,
            mse_train: r.mse_train,
            mse_test: r.mse_test,
            consensus_residual: r.consensus_residual,
            optimality_residual: r.optimality_residual,
            cumulative_transmissions: r.cumulative_transmissions,
        }
    }
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| SimError::io(path, e.into()))?;
    let header = reader.headers().map_err(|e| SimError::io(path, e.into()))?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(SimError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected trace header".into(),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| SimError::io(path, e.into()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| SimError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("bad {what}"),
        };
        let f = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(TRACE_HEADER[i]));
        let of = |i: usize| match rec.get(i) {
            Some(NA) => Ok(None),
            _ => f(i).map(Some),
        };
        out.push(TraceRecord {
            iteration: rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("iter"))?,
            mse_train: f(1)?,
            mse_test: of(2)?,
            consensus_residual: f(3)?,
            optimality_residual: of(4)?,
            cumulative_transmissions: rec.get(5).and_then(|s| s.parse().ok()).ok_or_else(|| bad("cum_transmissions"))?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub config: String,
    /// Whether the optimality residual was computed.
    pub has_optimum: bool,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub status: String,
    pub trace_file: String,
    pub iterations: usize,
    pub final_mse_train: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_mse_test: Option<f64>,
    pub final_consensus_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_optimality_residual: Option<f64>,
    pub total_transmissions: u64,
    pub per_agent_transmissions: Vec<u64>,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let text = toml::to_string(summary).map_err(|e| SimError::io(path, std::io::Error::other(e)))?;
    std::fs::write(path, text).map_err(|e| SimError::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    toml::from_str(&text).map_err(|e| SimError::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })
}
