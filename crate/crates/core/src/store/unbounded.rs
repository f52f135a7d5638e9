use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{file_len, Header, HEADER_LEN};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SGBU";

/// Dense per-sweep draws of watched coordinates from their unrestricted
/// conditional (no point mass at zero). The header's extra field holds the
/// watchlist length m, followed by m u64 coordinate ids; each sweep then
/// appends m f64 values.
pub struct UnboundedWriter {
    out: BufWriter<File>,
    m: usize,
}

impl UnboundedWriter {
    pub fn create(path: &Path, p: usize, watch: &[usize]) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        Header { magic: *MAGIC, p: p as u64, extra: watch.len() as u64 }.write(&mut out)?;
        for j in watch {
            out.write_all(&(*j as u64).to_le_bytes())?;
        }
        Ok(Self { out, m: watch.len() })
    }

    pub fn append(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.m {
            return Err(Error::DimensionMismatch("unbounded draw count".into()));
        }
        for v in values {
            self.out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub struct UnboundedReader {
    watch: Vec<usize>,
    data: Vec<f64>,
}

impl UnboundedReader {
    pub fn open(path: &Path) -> Result<Self> {
        let len = file_len(path)?;
        let mut r = BufReader::new(File::open(path)?);
        let h = Header::read(&mut r, &[MAGIC])?;
        let m = h.extra as usize;
        let mut buf = [0u8; 8];
        let mut watch = Vec::with_capacity(m);
        for _ in 0..m {
            r.read_exact(&mut buf)?;
            watch.push(u64::from_le_bytes(buf) as usize);
        }
        let body = len.saturating_sub(HEADER_LEN + 8 * m as u64) / 8;
        let sweeps = (body as usize).checked_div(m).unwrap_or(0);
        let mut data = Vec::with_capacity(sweeps * m);
        for _ in 0..sweeps * m {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        Ok(Self { watch, data })
    }

    pub fn watchlist(&self) -> &[usize] {
        &self.watch
    }

    pub fn sweeps(&self) -> usize {
        if self.watch.is_empty() {
            0
        } else {
            self.data.len() / self.watch.len()
        }
    }

    pub fn draws(&self, j: usize) -> Result<Vec<f64>> {
        let k = self.watch.iter().position(|w| *w == j).ok_or(Error::NotWatched(j))?;
        Ok(self.data.iter().skip(k).step_by(self.watch.len()).copied().collect())
    }
}
