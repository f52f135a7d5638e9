use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{file_len, Header, HEADER_LEN, PAIR_LEN};
use crate::error::{Error, Result};

const ENERGY_MAGIC: &[u8; 4] = b"SGBE";
const SORTED_MAGIC: &[u8; 4] = b"SGBI";

/// Appends (i64 iteration, f64 log posterior) pairs.
pub struct EnergyWriter {
    out: BufWriter<File>,
}

impl EnergyWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        Header { magic: *ENERGY_MAGIC, p: 0, extra: 0 }.write(&mut out)?;
        Ok(Self { out })
    }

    pub fn append(&mut self, iter: u64, log_p: f64) -> Result<()> {
        self.out.write_all(&(iter as i64).to_le_bytes())?;
        self.out.write_all(&log_p.to_le_bytes())?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Reads an energy file; a trailing partial pair is ignored.
pub fn read_energy(path: &Path) -> Result<Vec<(u64, f64)>> {
    let n = (file_len(path)?.saturating_sub(HEADER_LEN)) / PAIR_LEN;
    let mut r = BufReader::new(File::open(path)?);
    Header::read(&mut r, &[ENERGY_MAGIC])?;
    let mut out = Vec::with_capacity(n as usize);
    let mut buf = [0u8; 16];
    for k in 0..n {
        r.read_exact(&mut buf)?;
        let iter = i64::from_le_bytes(buf[0..8].try_into().unwrap());
        if iter < 0 {
            return Err(Error::CorruptRecord {
                offset: HEADER_LEN + k * PAIR_LEN,
                reason: "negative iteration".into(),
            });
        }
        out.push((iter as u64, f64::from_le_bytes(buf[8..16].try_into().unwrap())));
    }
    Ok(out)
}

/// A stored state reachable by an equi-energy jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEntry {
    pub log_p: f64,
    pub chain: u32,
    pub iter: u64,
}

/// Energies of one or more chains sorted ascending, for window queries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyIndex {
    entries: Vec<EnergyEntry>,
}

impl EnergyIndex {
    pub fn from_entries(mut entries: Vec<EnergyEntry>) -> Self {
        entries.retain(|e| e.log_p.is_finite());
        entries.sort_by(|a, b| {
            a.log_p
                .total_cmp(&b.log_p)
                .then(a.chain.cmp(&b.chain))
                .then(a.iter.cmp(&b.iter))
        });
        Self { entries }
    }

    pub fn from_energy_file(path: &Path, chain: u32) -> Result<Self> {
        Ok(Self::from_entries(
            read_energy(path)?
                .into_iter()
                .map(|(iter, log_p)| EnergyEntry { log_p, chain, iter })
                .collect(),
        ))
    }

    pub fn merge(parts: Vec<EnergyIndex>) -> Self {
        Self::from_entries(parts.into_iter().flat_map(|p| p.entries).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[EnergyEntry] {
        &self.entries
    }

    /// Entries with |log_p - target| < eps, found by binary search.
    pub fn window(&self, target: f64, eps: f64) -> &[EnergyEntry] {
        let lo = self.entries.partition_point(|e| e.log_p <= target - eps);
        let hi = self.entries.partition_point(|e| e.log_p < target + eps);
        if lo >= hi {
            &[]
        } else {
            &self.entries[lo..hi]
        }
    }

    /// Writes (f64 value, u64 position) pairs; the position packs the chain
    /// id in the top 24 bits and the iteration in the low 40.
    pub fn write_sorted(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        Header { magic: *SORTED_MAGIC, p: 0, extra: self.entries.len() as u64 }.write(&mut out)?;
        for e in &self.entries {
            out.write_all(&e.log_p.to_le_bytes())?;
            out.write_all(&(((e.chain as u64) << 40) | e.iter).to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_sorted(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let h = Header::read(&mut r, &[SORTED_MAGIC])?;
        let mut entries = Vec::with_capacity(h.extra as usize);
        let mut buf = [0u8; 16];
        for _ in 0..h.extra {
            r.read_exact(&mut buf)?;
            let log_p = f64::from_le_bytes(buf[0..8].try_into().unwrap());
            let pos = u64::from_le_bytes(buf[8..16].try_into().unwrap());
            entries.push(EnergyEntry { log_p, chain: (pos >> 40) as u32, iter: pos & ((1 << 40) - 1) });
        }
        Ok(Self { entries })
    }
}
