//! CSV and grayscale-heatmap renderings of a correlation matrix.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::CorrelationMatrix;

/// CSV text: header `ref,<det labels...>`, then one row per reference
/// label with IoU cells to 6 decimal places.
pub fn render_matrix_csv(matrix: &CorrelationMatrix) -> String {
    let mut out = String::from("ref");
    for d in &matrix.detected_labels {
        write!(out, ",{d}").unwrap();
    }
    out.push('\n');
    for (i, r) in matrix.reference_labels.iter().enumerate() {
        write!(out, "{r}").unwrap();
        for v in &matrix.iou[i] {
            write!(out, ",{v:.6}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(matrix: &CorrelationMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, render_matrix_csv(matrix)).map_err(|e| Error::io(path, e))
}

/// Binary portable graymap (P5): one 8-bit pixel per cell, value
/// `round(iou * 255)`, row 0 (largest reference segment) at the top.
pub fn render_matrix_heatmap(matrix: &CorrelationMatrix) -> Result<Vec<u8>> {
    let (rows, cols) = (matrix.rows(), matrix.cols());
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyHeatmap);
    }
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    for row in &matrix.iou {
        for &v in row {
            out.push((v * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn write_matrix_heatmap(matrix: &CorrelationMatrix, path: &Path) -> Result<()> {
    let bytes = render_matrix_heatmap(matrix)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
