//! Plain numeric CSV input: design matrices (one row per sample, no header)
//! and response vectors (one value per line).

use std::path::Path;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::model::DesignMatrix;

fn parse_field(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{}` is not a number", field.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value `{}`", field.trim()),
        });
    }
    Ok(v)
}

fn read_rows<R: std::io::Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| parse_field(f, line))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Parses a design matrix from CSV text.
pub fn parse_design<R: std::io::Read>(reader: R) -> Result<DesignMatrix> {
    let rows = read_rows(reader)?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "empty matrix".into(),
        });
    }
    let p = rows[0].len();
    let mut flat = Vec::with_capacity(n * p);
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != p {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {p} columns, found {}", row.len()),
            });
        }
        flat.extend(row);
    }
    DesignMatrix::from_rows(n, p, flat)
}

/// Parses a response vector: one value per line.
pub fn parse_response<R: std::io::Read>(reader: R) -> Result<Array1<f64>> {
    let rows = read_rows(reader)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != 1 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected one value per line, found {}", row.len()),
            });
        }
        out.push(row[0]);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "empty response".into(),
        });
    }
    Ok(Array1::from(out))
}

pub fn read_design(path: impl AsRef<Path>) -> Result<DesignMatrix> {
    parse_design(std::fs::File::open(path)?)
}

pub fn read_response(path: impl AsRef<Path>) -> Result<Array1<f64>> {
    parse_response(std::fs::File::open(path)?)
}

/// Writes a design as CSV with full round-trip precision.
pub fn write_design(path: impl AsRef<Path>, x: &DesignMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in x.view().rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_response(path: impl AsRef<Path>, y: &Array1<f64>) -> Result<()> {
    let text: String = y.iter().map(|v| format!("{v:?}\n")).collect();
    std::fs::write(path, text)?;
    Ok(())
}
