//! Reading and writing design matrices and response vectors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::DesignMatrix;
use crate::error::{Error, Result};

const MATRIX_MAGIC: &[u8; 4] = b"SGXM";

/// Reads a CSV matrix with one observation per row.
pub fn read_csv_matrix(path: &Path, has_header: bool) -> Result<DesignMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DesignMatrix::from_rows(&rows)
}

/// Reads a single-column CSV (or the first column of a wider file).
pub fn read_csv_vector(path: &Path, has_header: bool) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let s = rec.get(0).ok_or_else(|| Error::Parse("empty row".into()))?;
        let v: f64 = s.parse().map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        if !v.is_finite() {
            return Err(Error::NonFiniteInput("response"));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_csv_matrix(path: &Path, x: &DesignMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for i in 0..x.n() {
        w.write_record((0..x.p()).map(|j| x.get(i, j).to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for x in v {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Binary layout: magic, u64 n, u64 p, then n*p little-endian f64 column-major.
pub fn write_binary_matrix(path: &Path, x: &DesignMatrix) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(MATRIX_MAGIC)?;
    f.write_all(&(x.n() as u64).to_le_bytes())?;
    f.write_all(&(x.p() as u64).to_le_bytes())?;
    for v in x.values() {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_binary_matrix(path: &Path) -> Result<DesignMatrix> {
    let mut f = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Parse("not a binary design matrix".into()));
    }
    let mut buf = [0u8; 8];
    f.read_exact(&mut buf)?;
    let n = u64::from_le_bytes(buf) as usize;
    f.read_exact(&mut buf)?;
    let p = u64::from_le_bytes(buf) as usize;
    let mut values = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        f.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    DesignMatrix::from_column_major(n, p, values)
}
