//! Shared CSV matrix format.
//!
//! One matrix row per line, comma-separated decimal floats, no header;
//! dimensions are inferred from the line and field counts. Files with
//! columns-as-samples conventions (training sets, observation batches)
//! simply store the matrix that way. All output uses '.' decimals, '\n'
//! line endings, and UTF-8.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Parses a matrix from CSV text.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in trimmed.split(',') {
            let value: f64 = field.trim().parse().map_err(|_| Error::Io {
                what: format!("line {}: cannot parse '{}' as a number", lineno + 1, field.trim()),
            })?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Io {
                    what: format!(
                        "line {}: expected {} fields, got {}",
                        lineno + 1,
                        first.len(),
                        row.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Io { what: "empty matrix file".into() });
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Reads a matrix from a CSV file.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io { what: format!("{}: {e}", path.display()) })?;
    parse_matrix(&text)
}

/// Formats a matrix as CSV text (shortest round-trip float formatting).
pub fn format_matrix(mat: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", mat[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Writes a matrix to a CSV file.
pub fn write_matrix(path: &Path, mat: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix(mat))
        .map_err(|e| Error::Io { what: format!("{}: {e}", path.display()) })
}

/// Reads a single-column label file (one integer per line).
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io { what: format!("{}: {e}", path.display()) })?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v: usize = trimmed.parse().map_err(|_| Error::Io {
            what: format!("line {}: cannot parse '{}' as a label", lineno + 1, trimmed),
        })?;
        labels.push(v);
    }
    if labels.is_empty() {
        return Err(Error::Io { what: "empty label file".into() });
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_values() {
        let mat = DMatrix::from_row_slice(2, 3, &[1.5, -2.0, 0.0, 1e-12, 3.25, -7.5e8]);
        let text = format_matrix(&mat);
        let back = parse_matrix(&text).unwrap();
        assert_eq!(mat, back);
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(matches!(parse_matrix("1,2\n3\n"), Err(Error::Io { .. })));
        assert!(matches!(parse_matrix("1,x\n"), Err(Error::Io { .. })));
        assert!(matches!(parse_matrix("  \n"), Err(Error::Io { .. })));
    }

    #[test]
    fn parses_with_whitespace() {
        let mat = parse_matrix(" 1 , 2 \n 3 , 4 \n").unwrap();
        assert_eq!(mat, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }
}
