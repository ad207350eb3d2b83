//! CSV ingestion for datasets and point files.

use std::fs::File;
use std::path::Path;

use mmdpoints_core::{EmpiricalTarget, PointSet};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalize {
    #[default]
    Zscore,
    None,
}

/// Reads a numeric CSV into row-major values; rows must all have the same width.
pub fn read_matrix(path: &Path, header: bool) -> Result<(Vec<f64>, usize)> {
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(file);
    let first_row = if header { 2 } else { 1 };
    let mut data = Vec::new();
    let mut width = 0;
    for (i, record) in reader.records().enumerate() {
        let row = first_row + i;
        let record = record.map_err(|e| BenchError::data(path, format!("row {row}: {e}")))?;
        if i == 0 {
            width = record.len();
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| BenchError::Cell {
                path: path.to_path_buf(),
                row,
                col: col + 1,
                reason: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(BenchError::Cell {
                    path: path.to_path_buf(),
                    row,
                    col: col + 1,
                    reason: "value is not finite".into(),
                });
            }
            data.push(v);
        }
    }
    if data.is_empty() || width == 0 {
        return Err(BenchError::data(path, "no data rows"));
    }
    Ok((data, width))
}

pub fn load_points(path: &Path, header: bool) -> Result<PointSet<f64>> {
    let (data, d) = read_matrix(path, header)?;
    Ok(PointSet::new(data, d)?)
}

/// Writes one point per row at 17 significant digits.
pub fn write_points(path: &Path, x: &PointSet<f64>) -> Result<()> {
    let mut s = String::new();
    for row in x.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| BenchError::io(path, e))
}

/// Loads a dataset target, optionally z-scoring every column with the
/// population standard deviation.
pub fn load_dataset(path: &Path, normalize: Normalize, header: bool) -> Result<EmpiricalTarget<f64>> {
    let (mut data, d) = read_matrix(path, header)?;
    if normalize == Normalize::Zscore {
        zscore(&mut data, d)
            .map_err(|col| BenchError::data(path, format!("column {} is constant and cannot be z-scored", col + 1)))?;
    }
    Ok(EmpiricalTarget::new(PointSet::new(data, d)?))
}

/// Standardizes columns in place; returns the index of a constant column.
pub fn zscore(data: &mut [f64], d: usize) -> std::result::Result<(), usize> {
    let n = (data.len() / d) as f64;
    for col in 0..d {
        let mean = data.iter().skip(col).step_by(d).sum::<f64>() / n;
        let var = data
            .iter()
            .skip(col)
            .step_by(d)
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        if !(sd > 0.0) {
            return Err(col);
        }
        data.iter_mut().skip(col).step_by(d).for_each(|v| *v = (*v - mean) / sd);
    }
    Ok(())
}
