use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{file_len, Header, HEADER_LEN};
use crate::error::Result;

const MAGIC: &[u8; 4] = b"SGBS";
const RECORD_LEN: u64 = 40;

/// Per-iteration scalar parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRecord {
    pub iter: u64,
    pub sigma2: f64,
    pub pi_a: f64,
    pub tau_f2: f64,
    /// Log importance weight (0 unless the logistic approximation is used).
    pub log_weight: f64,
}

pub struct ScalarWriter {
    out: BufWriter<File>,
}

impl ScalarWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        Header { magic: *MAGIC, p: 0, extra: 0 }.write(&mut out)?;
        Ok(Self { out })
    }

    pub fn append(&mut self, r: &ScalarRecord) -> Result<()> {
        self.out.write_all(&(r.iter as i64).to_le_bytes())?;
        for v in [r.sigma2, r.pi_a, r.tau_f2, r.log_weight] {
            self.out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_scalars(path: &Path) -> Result<Vec<ScalarRecord>> {
    let n = file_len(path)?.saturating_sub(HEADER_LEN) / RECORD_LEN;
    let mut r = BufReader::new(File::open(path)?);
    Header::read(&mut r, &[MAGIC])?;
    let mut buf = [0u8; RECORD_LEN as usize];
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        let f = |k: usize| f64::from_le_bytes(buf[k..k + 8].try_into().unwrap());
        out.push(ScalarRecord {
            iter: i64::from_le_bytes(buf[0..8].try_into().unwrap()) as u64,
            sigma2: f(8),
            pi_a: f(16),
            tau_f2: f(24),
            log_weight: f(32),
        });
    }
    Ok(out)
}
