//! File formats: headerless matrix CSV, returns CSV with an asset header
//! row, and the JSON fit report.

use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covmodel::FactorFit;
use crate::error::{Error, Result};

/// Reads a headerless CSV of reals, one matrix row per line, `.` decimal
/// separator. Enforces rectangularity.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix_csv(&text)
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number '{}'", lineno + 1, cell.trim())))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix file".into()));
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

/// Writes a matrix as headerless CSV with full round-trip precision.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_f64(m[(i, j)])).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a returns CSV: header row of asset identifiers, one row per
/// trading day. Returns `(asset_names, T x n matrix)`.
pub fn read_returns_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let text = std::fs::read_to_string(path)?;
    parse_returns_csv(&text)
}

pub fn parse_returns_csv(text: &str) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty returns file".into()))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.is_empty() || names.iter().any(|s| s.is_empty()) {
        return Err(Error::Parse("malformed header row".into()));
    }
    let body: String = lines.collect::<Vec<_>>().join("\n");
    if body.is_empty() {
        return Err(Error::Parse("returns file has no data rows".into()));
    }
    let m = parse_matrix_csv(&body)?;
    if m.ncols() != names.len() {
        return Err(Error::Parse(format!(
            "header names {} columns but rows have {}",
            names.len(),
            m.ncols()
        )));
    }
    Ok((names, m))
}

/// Writes a returns matrix with a header of asset identifiers.
pub fn write_returns_csv(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    if names.len() != m.ncols() {
        return Err(Error::InvalidInput("one name per column required".into()));
    }
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", names.join(","))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_f64(m[(i, j)])).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Shortest decimal representation that round-trips the exact f64
/// (`{}` on f64 is shortest round-trip in Rust), with a `.0` suffix on
/// integral values so columns stay visibly floating point.
pub fn format_f64(v: f64) -> String {
    let mut buf = format!("{v}");
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

/// Serialized fit report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub rank: usize,
    pub sigma_sq: Vec<f64>,
    #[serde(rename = "ssT")]
    pub sst: Vec<f64>,
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
}

impl FitReport {
    pub fn from_fit(fit: &FactorFit) -> Self {
        let n = fit.sst.nrows();
        let mut sst = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                sst.push(fit.sst[(i, j)]);
            }
        }
        FitReport {
            method: fit.method.as_str().to_string(),
            rank: fit.rank,
            sigma_sq: fit.sigma_sq.iter().cloned().collect(),
            sst,
            loss_trace: fit.loss_trace.clone(),
            iterations: fit.iterations,
            converged: fit.converged,
            feasible: fit.feasible,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}
