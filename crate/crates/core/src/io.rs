//! Plain CSV matrices.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! matrix written here and read back is bit-identical.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{LmsError, Result};
use crate::linalg::Matrix;

/// Reads a comma-separated numeric matrix. A first row containing any
/// non-numeric cell is taken as a header and skipped.
pub fn read_matrix<R: Read>(reader: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<Option<f64>> = rec.iter().map(|c| c.parse::<f64>().ok()).collect();
        if line == 0 && rows.is_empty() && parsed.iter().any(Option::is_none) {
            continue;
        }
        let w = *width.get_or_insert(parsed.len());
        if parsed.len() != w {
            return Err(LmsError::Shape(format!(
                "line {}: {} fields, expected {w}",
                line + 1,
                parsed.len()
            )));
        }
        let row = parsed
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                v.ok_or_else(|| {
                    LmsError::Parse(format!("line {}, field {}: {:?}", line + 1, j + 1, &rec[j]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(LmsError::Parse("no numeric rows".into()));
    }
    Matrix::from_rows(&rows)
}

pub fn read_matrix_path(path: &Path) -> Result<Matrix> {
    read_matrix(File::open(path)?)
}

/// Writes the matrix without a header, one row per line.
pub fn write_matrix<W: Write>(m: &Matrix, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_path(m: &Matrix, path: &Path) -> Result<()> {
    write_matrix(m, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn headerless() {
        let m = read_matrix("1,2\n3,4\n5,6\n".as_bytes()).unwrap();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m[(2, 1)], 6.0);
    }

    #[test]
    fn header_skipped() {
        let m = read_matrix("a,b\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m[(0, 0)], 1.0);
    }

    #[test]
    fn ragged_and_text_rejected() {
        assert!(matches!(read_matrix("1,2\n3\n".as_bytes()), Err(LmsError::Shape(_))));
        assert!(matches!(read_matrix("1,2\n3,x\n".as_bytes()), Err(LmsError::Parse(_))));
        assert!(read_matrix("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn roundtrip_is_exact() {
        let mut rng = stream_rng(5, 0);
        let m = Matrix::from_fn(7, 4, |_, _| rng.random::<f64>() * 1e3 - 500.0);
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        let back = read_matrix(buf.as_slice()).unwrap();
        assert_eq!(back.shape(), m.shape());
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
