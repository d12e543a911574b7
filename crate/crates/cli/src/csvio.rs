//! CSV formats: log-density matrices (header of model labels, one
//! observation per row) and optimism vectors (`model,optimism`). All floats
//! are emitted with 17 significant digits so files round-trip bit-exactly.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use modelmix_core::{LogDensityMatrix, OptimismVector};

/// A malformed-input diagnostic with 1-based row/column coordinates.
/// `dimension` marks label/length mismatches (exit code 3 at the CLI) as
/// opposed to unparseable content (exit code 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvError {
    pub message: String,
    pub dimension: bool,
}

impl fmt::Display for CsvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CsvError {}

fn bad(message: String) -> CsvError {
    CsvError {
        message,
        dimension: false,
    }
}

fn mismatch(message: String) -> CsvError {
    CsvError {
        message,
        dimension: true,
    }
}

/// Formats a float with 17 significant digits (round-trip exact for f64).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_matrix_csv<R: BufRead>(reader: R) -> Result<LogDensityMatrix, CsvError> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(line))) => line,
        Some((_, Err(e))) => return Err(bad(format!("read error on row 1: {e}"))),
        None => return Err(bad("empty input: expected a header row".into())),
    };
    let labels: Vec<String> = header
        .trim_end_matches(['\r', '\n'])
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if labels.iter().any(String::is_empty) {
        return Err(bad("empty model label in header row 1".into()));
    }
    let k = labels.len();

    let mut values = Vec::new();
    let mut n = 0usize;
    for (idx, line) in lines {
        let row = idx + 1; // 1-based, header is row 1
        let line = line.map_err(|e| bad(format!("read error on row {row}: {e}")))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != k {
            return Err(bad(format!(
                "row {row} has {} columns, expected {k}",
                cells.len()
            )));
        }
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                bad(format!(
                    "non-numeric value {:?} at row {row}, column {}",
                    cell.trim(),
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(bad(format!(
                    "non-finite value at row {row}, column {}",
                    col + 1
                )));
            }
            values.push(v);
        }
        n += 1;
    }
    LogDensityMatrix::new(values, n, k, labels).map_err(|e| bad(e.to_string()))
}

pub fn write_matrix_csv<W: Write>(mut writer: W, matrix: &LogDensityMatrix) -> std::io::Result<()> {
    writeln!(writer, "{}", matrix.labels().join(","))?;
    for row in matrix.rows() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_float(v)).collect();
        writeln!(writer, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Reads a two-column `model,optimism` CSV and aligns it to `labels`
/// (order-insensitive; the label sets must match exactly).
pub fn read_optimism_csv<R: BufRead>(
    reader: R,
    labels: &[String],
) -> Result<OptimismVector, CsvError> {
    let mut by_label: HashMap<String, f64> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line.map_err(|e| bad(format!("read error on row {row}: {e}")))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        if row == 1 && line.trim() == "model,optimism" {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 2 {
            return Err(bad(format!(
                "optimism row {row} has {} columns, expected 2",
                cells.len()
            )));
        }
        let label = cells[0].trim().to_string();
        let value: f64 = cells[1].trim().parse().map_err(|_| {
            bad(format!(
                "non-numeric optimism {:?} at row {row}, column 2",
                cells[1].trim()
            ))
        })?;
        if by_label.insert(label.clone(), value).is_some() {
            return Err(bad(format!(
                "duplicate optimism label {label:?} at row {row}"
            )));
        }
    }
    let mut op = Vec::with_capacity(labels.len());
    for label in labels {
        match by_label.remove(label) {
            Some(v) => op.push(v),
            None => {
                return Err(mismatch(format!(
                    "missing optimism entry for model {label:?}"
                )))
            }
        }
    }
    if let Some(extra) = by_label.keys().next() {
        return Err(mismatch(format!(
            "optimism entry {extra:?} does not match any matrix column"
        )));
    }
    OptimismVector::new(op).map_err(|e| bad(e.to_string()))
}
