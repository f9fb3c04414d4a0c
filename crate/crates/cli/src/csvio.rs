//! Minimal CSV ingestion: rows are observations, columns are variables.
//! A single non-numeric first line is treated as a header and skipped;
//! `force_header` skips it unconditionally.

use std::path::Path;

use hdwilks::{Error, Result};
use nalgebra::DMatrix;

fn parse_row(line: &str) -> Option<Vec<f64>> {
    line.split(',')
        .map(|tok| tok.trim().parse::<f64>().ok())
        .collect()
}

pub fn read_matrix(path: &Path, force_header: bool) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parsed = parse_row(line);
        if rows.is_empty() && width.is_none() && (force_header || parsed.is_none()) {
            // Header row; only acceptable as the very first non-empty line.
            width = Some(line.split(',').count());
            continue;
        }
        let row = parsed.ok_or_else(|| {
            Error::Parse(format!(
                "{}: line {}: non-numeric entry in '{line}'",
                path.display(),
                lineno + 1
            ))
        })?;
        if let Some(w) = width {
            if row.len() != w {
                return Err(Error::Parse(format!(
                    "{}: line {}: expected {w} columns, found {}",
                    path.display(),
                    lineno + 1,
                    row.len()
                )));
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    let ncols = width.unwrap_or(0);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
