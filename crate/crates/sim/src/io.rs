//! Dataset CSV and edge-list files.
//!
//! Dataset CSV: comma separated, optional header line, the last column is the
//! label. Edge list: one `i n` pair per line (whitespace or comma separated),
//! blank lines and `#` comments ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use coke_core::data::RawDataset;
use coke_core::Matrix;

use crate::error::{Result, SimError};

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> SimError {
    SimError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn load_csv(path: &Path, has_header: bool) -> Result<RawDataset> {
    let file = File::open(path).map_err(|e| SimError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut width = None;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 2 {
            return Err(parse_err(path, line, "need at least one feature column and a label"));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(path, line, format!("expected {w} columns, found {}", record.len())));
            }
            _ => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(path, line, format!("column {}: cannot parse {cell:?} as a number", c + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("column {}: non-finite value", c + 1)));
            }
            if c + 1 == record.len() {
                labels.push(v);
            } else {
                data.push(v);
            }
        }
    }
    let Some(width) = width else {
        return Err(parse_err(path, 1, "file holds no data rows"));
    };
    let features = Matrix::from_vec(labels.len(), width - 1, data).expect("row widths checked");
    Ok(RawDataset::new(features, labels).expect("one label per row"))
}

/// Writes `x1,…,xd,y` followed by one row per sample.
pub fn write_dataset_csv(path: &Path, data: &RawDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SimError::io(path, e.into()))?;
    let mut header: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(|e| SimError::io(path, e.into()))?;
    for (row, y) in data.features.row_iter().zip(&data.labels) {
        let rec = row.iter().chain(std::iter::once(y)).map(|v| v.to_string());
        w.write_record(rec).map_err(|e| SimError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize)>> {
    let file = File::open(path).map_err(|e| SimError::io(path, e))?;
    let mut edges = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| SimError::io(path, e))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let ids: Vec<&str> = body.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if ids.len() != 2 {
            return Err(parse_err(path, lineno, format!("expected two node ids, found {}", ids.len())));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(path, lineno, format!("cannot parse {s:?} as a node id")))
        };
        edges.push((parse(ids[0])?, parse(ids[1])?));
    }
    Ok(edges)
}

pub fn write_edge_list(path: &Path, edges: &[(usize, usize)]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| SimError::io(path, e))?;
    for (a, b) in edges {
        writeln!(f, "{a} {b}").map_err(|e| SimError::io(path, e))?;
    }
    Ok(())
}
