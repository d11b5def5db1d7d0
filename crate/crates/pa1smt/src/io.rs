//! Dataset IO. On disk, samples are rows (human convention); in memory,
//! samples are columns (d x n). This layer owns the transpose.
//!
//! Two matrix formats:
//! - CSV: one sample per row, optional header, optional final integer
//!   label column.
//! - raw: two little-endian u64 dims (rows, cols) followed by row-major
//!   little-endian f64 entries; bit-exact round-trips.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// One domain's samples (columns) with optional integer labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn feature_dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.features.ncols()
    }

    /// Drop labels, keeping only the unlabeled feature matrix.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            features: self.features.clone(),
            labels: None,
        }
    }
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| {
        Error::Data(format!(
            "row {row}, column {col}: cannot parse {cell:?} as a number"
        ))
    })
}

/// Load a CSV matrix, one sample per row. When `label_column` is set the
/// final column is read as integer labels. A non-numeric first row is
/// treated as a header.
pub fn load_csv(path: &Path, label_column: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        // header detection: skip a first row that does not parse
        if idx == 0 && record.iter().any(|c| c.trim().parse::<f64>().is_err()) {
            continue;
        }
        let cells: Vec<&str> = record.iter().collect();
        let feature_count = if label_column {
            cells.len().checked_sub(1).ok_or_else(|| {
                Error::Data(format!("row {idx}: no room for a label column"))
            })?
        } else {
            cells.len()
        };
        match width {
            None => width = Some(feature_count),
            Some(w) if w != feature_count => {
                return Err(Error::Data(format!(
                    "row {idx} has {feature_count} features, expected {w}"
                )));
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(feature_count);
        for (col, cell) in cells[..feature_count].iter().enumerate() {
            row.push(parse_cell(cell, idx, col)?);
        }
        rows.push(row);
        if label_column {
            let cell = cells[feature_count].trim();
            let y: usize = cell.parse().map_err(|_| {
                Error::Data(format!("row {idx}: label {cell:?} is not a nonnegative integer"))
            })?;
            labels.push(y);
        }
    }
    let n = rows.len();
    let d = width.ok_or_else(|| Error::Data(format!("{}: no data rows", path.display())))?;
    if n == 0 || d == 0 {
        return Err(Error::Data(format!("{}: empty matrix", path.display())));
    }
    let mut features = Array2::zeros((d, n));
    for (j, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Data(format!("row {j}, column {i}: non-finite value")));
            }
            features[[i, j]] = v;
        }
    }
    Ok(Dataset {
        features,
        labels: if label_column { Some(labels) } else { None },
    })
}

/// Write a dataset as CSV, one sample per row, labels (if any) in the
/// final column. Uses the shortest round-trip float representation.
pub fn save_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let x = &dataset.features;
    for j in 0..x.ncols() {
        let mut cells: Vec<String> = x.column(j).iter().map(|v| format!("{v}")).collect();
        if let Some(labels) = &dataset.labels {
            cells.push(labels[j].to_string());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Load the raw binary matrix format (samples as rows on disk) and return
/// it in the internal columns-as-samples orientation.
pub fn load_raw(path: &Path) -> Result<Array2<f64>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut dims = [0u8; 16];
    reader
        .read_exact(&mut dims)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let rows = u64::from_le_bytes(dims[..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(dims[8..].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Data(format!(
            "{}: degenerate dims {rows}x{cols}",
            path.display()
        )));
    }
    let mut buf = vec![0u8; rows * cols * 8];
    reader
        .read_exact(&mut buf)
        .map_err(|e| Error::Data(format!("{}: truncated payload: {e}", path.display())))?;
    let mut extra = [0u8; 1];
    if reader.read(&mut extra)? != 0 {
        return Err(Error::Data(format!(
            "{}: trailing bytes after {rows}x{cols} payload",
            path.display()
        )));
    }
    let mut m = Array2::zeros((cols, rows)); // transpose: disk rows are samples
    for i in 0..rows {
        for j in 0..cols {
            let off = (i * cols + j) * 8;
            m[[j, i]] = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
        }
    }
    Ok(m)
}

/// Write the raw binary format; `x` is columns-as-samples and lands on
/// disk as samples-as-rows.
pub fn save_raw(path: &Path, x: ArrayView2<'_, f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let rows = x.ncols() as u64;
    let cols = x.nrows() as u64;
    out.write_all(&rows.to_le_bytes())?;
    out.write_all(&cols.to_le_bytes())?;
    for sample in x.axis_iter(Axis(1)) {
        for &v in sample.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Single-column integer label file.
pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let content = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(line.parse().map_err(|_| {
            Error::Data(format!("label file line {i}: {line:?} is not an integer"))
        })?);
    }
    if labels.is_empty() {
        return Err(Error::Data("label file is empty".into()));
    }
    Ok(labels)
}

pub fn save_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for y in labels {
        writeln!(out, "{y}")?;
    }
    out.flush()?;
    Ok(())
}
