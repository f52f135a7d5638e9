use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use super::{file_len, Header, DEFAULT_BUFFER_PAIRS, HEADER_LEN, PAIR_LEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseKind {
    /// Coefficient values of active coordinates.
    Beta,
    /// Slab variances of active groups, indexed by group id.
    Tau,
    /// Per-coordinate inclusion probabilities.
    Mip,
}

impl SparseKind {
    fn magic(self) -> &'static [u8; 4] {
        match self {
            SparseKind::Beta => b"SGBC",
            SparseKind::Tau => b"SGBT",
            SparseKind::Mip => b"SGBM",
        }
    }

    fn from_magic(m: &[u8; 4]) -> Option<Self> {
        [SparseKind::Beta, SparseKind::Tau, SparseKind::Mip]
            .into_iter()
            .find(|k| k.magic() == m)
    }
}

/// One stored iteration: the iteration id (starting at 1) and its nonzero
/// (coordinate, value) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseChainRecord {
    pub iter: u64,
    pub entries: Vec<(usize, f64)>,
}

/// Payload bytes for a sequence of records: 16 bytes per sentinel and per entry.
pub fn payload_size(sweeps: u64, total_entries: u64) -> u64 {
    PAIR_LEN * (sweeps + total_entries)
}

/// Buffered writer. Pairs accumulate in two parallel buffers and are
/// flushed whenever the next record would not fit.
pub struct SparseChainWriter {
    file: File,
    values: Vec<f64>,
    indices: Vec<i64>,
    capacity: usize,
    bytes: Vec<u8>,
    p: usize,
    last_iter: u64,
}

impl SparseChainWriter {
    pub fn create(path: &Path, kind: SparseKind, p: usize) -> Result<Self> {
        Self::with_capacity(path, kind, p, DEFAULT_BUFFER_PAIRS)
    }

    pub fn with_capacity(path: &Path, kind: SparseKind, p: usize, capacity: usize) -> Result<Self> {
        let mut file = File::create(path)?;
        Header { magic: *kind.magic(), p: p as u64, extra: 0 }.write(&mut file)?;
        let capacity = capacity.max(1);
        Ok(Self {
            file,
            values: Vec::with_capacity(capacity),
            indices: Vec::with_capacity(capacity),
            capacity,
            bytes: Vec::new(),
            p,
            last_iter: 0,
        })
    }

    pub fn append(&mut self, rec: &SparseChainRecord) -> Result<()> {
        if rec.iter == 0 {
            return Err(Error::Config("iteration ids start at 1".into()));
        }
        if let Some((j, _)) = rec.entries.iter().find(|(j, _)| *j >= self.p) {
            return Err(Error::DimensionMismatch(format!("coordinate {j} >= p = {}", self.p)));
        }
        let need = 1 + rec.entries.len();
        if self.capacity - self.values.len() < need {
            self.flush()?;
        }
        self.values.push(-(rec.iter as f64));
        self.indices.push(-(rec.entries.len() as i64));
        for &(j, v) in &rec.entries {
            self.values.push(v);
            self.indices.push(j as i64);
        }
        if self.values.len() > self.capacity {
            self.flush()?;
        }
        self.last_iter = rec.iter;
        Ok(())
    }

    /// Writes buffered pairs to disk.
    pub fn flush(&mut self) -> Result<()> {
        if self.values.is_empty() {
            return Ok(());
        }
        self.bytes.clear();
        for (v, i) in self.values.iter().zip(&self.indices) {
            self.bytes.extend_from_slice(&v.to_le_bytes());
            self.bytes.extend_from_slice(&i.to_le_bytes());
        }
        self.file.write_all(&self.bytes)?;
        self.values.clear();
        self.indices.clear();
        Ok(())
    }

    pub fn buffered_pairs(&self) -> usize {
        self.values.len()
    }

    pub fn finish(mut self) -> Result<()> {
        self.flush()?;
        self.file.sync_all()?;
        Ok(())
    }
}

impl Drop for SparseChainWriter {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

/// Records read from a file plus the byte offset of a truncated trailing
/// record, if one was found.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadOutcome {
    pub records: Vec<SparseChainRecord>,
    pub truncated_at: Option<u64>,
}

pub struct SparseChainReader {
    reader: BufReader<File>,
    kind: SparseKind,
    p: usize,
    offset: u64,
    len: u64,
}

impl SparseChainReader {
    pub fn open(path: &Path) -> Result<Self> {
        let len = file_len(path)?;
        let mut reader = BufReader::new(File::open(path)?);
        let h = Header::read(&mut reader, &[b"SGBC", b"SGBT", b"SGBM"])?;
        let kind = SparseKind::from_magic(&h.magic).expect("magic checked");
        Ok(Self { reader, kind, p: h.p as usize, offset: HEADER_LEN, len })
    }

    pub fn kind(&self) -> SparseKind {
        self.kind
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Byte offset of the next record.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn seek(&mut self, offset: u64) -> Result<()> {
        self.reader.seek(SeekFrom::Start(offset))?;
        self.offset = offset;
        Ok(())
    }

    fn read_pair(&mut self) -> Result<(f64, i64)> {
        let mut buf = [0u8; 16];
        self.reader.read_exact(&mut buf)?;
        self.offset += PAIR_LEN;
        Ok((
            f64::from_le_bytes(buf[0..8].try_into().unwrap()),
            i64::from_le_bytes(buf[8..16].try_into().unwrap()),
        ))
    }

    /// Reads the next record. `Ok(None)` at a clean end of file;
    /// `Err(CorruptRecord)` with reason "truncated" for a partial record.
    pub fn next_record(&mut self) -> Result<Option<SparseChainRecord>> {
        let start = self.offset;
        let remaining = self.len.saturating_sub(start);
        if remaining == 0 {
            return Ok(None);
        }
        let truncated = || Error::CorruptRecord { offset: start, reason: "truncated".into() };
        if remaining < PAIR_LEN {
            return Err(truncated());
        }
        let (d, i) = self.read_pair()?;
        if !(d < 0.0) || d.fract() != 0.0 || i > 0 {
            return Err(Error::CorruptRecord {
                offset: start,
                reason: format!("expected sentinel, found ({d}, {i})"),
            });
        }
        let count = i.unsigned_abs();
        if (remaining - PAIR_LEN) < count * PAIR_LEN {
            return Err(truncated());
        }
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let at = self.offset;
            let (v, j) = self.read_pair()?;
            if j < 0 || j as u64 >= self.p as u64 {
                return Err(Error::CorruptRecord {
                    offset: at,
                    reason: format!("coordinate {j} out of range"),
                });
            }
            entries.push((j as usize, v));
        }
        Ok(Some(SparseChainRecord { iter: (-d) as u64, entries }))
    }

    /// Reads every complete record; a truncated tail is reported, other
    /// corruption is an error.
    pub fn read_all(mut self) -> Result<ReadOutcome> {
        let mut records = Vec::new();
        loop {
            match self.next_record() {
                Ok(Some(r)) => records.push(r),
                Ok(None) => return Ok(ReadOutcome { records, truncated_at: None }),
                Err(Error::CorruptRecord { offset, reason }) if reason == "truncated" => {
                    return Ok(ReadOutcome { records, truncated_at: Some(offset) })
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Iteration id to byte offset for every complete record.
    pub fn build_offset_index(mut self) -> Result<Vec<(u64, u64)>> {
        let mut out = Vec::new();
        loop {
            let at = self.offset;
            match self.next_record() {
                Ok(Some(r)) => out.push((r.iter, at)),
                Ok(None) => return Ok(out),
                Err(Error::CorruptRecord { reason, .. }) if reason == "truncated" => return Ok(out),
                Err(e) => return Err(e),
            }
        }
    }
}

/// Dense trace of one coordinate over the stored iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTrace {
    pub iters: Vec<u64>,
    pub values: Vec<f64>,
    pub truncated_at: Option<u64>,
}

pub fn read_coefficient_trace(
    path: &Path,
    j: usize,
    range: Option<RangeInclusive<u64>>,
) -> Result<CoefficientTrace> {
    let out = SparseChainReader::open(path)?.read_all()?;
    let mut iters = Vec::new();
    let mut values = Vec::new();
    for r in out.records {
        if range.as_ref().is_some_and(|rg| !rg.contains(&r.iter)) {
            continue;
        }
        iters.push(r.iter);
        values.push(r.entries.iter().find(|(k, _)| *k == j).map_or(0.0, |(_, v)| *v));
    }
    Ok(CoefficientTrace { iters, values, truncated_at: out.truncated_at })
}

/// Average of the stored per-coordinate probabilities (absent = 0).
pub fn compute_mips(path: &Path, p: usize) -> Result<Vec<f64>> {
    let out = SparseChainReader::open(path)?.read_all()?;
    let mut acc = vec![0.0; p];
    for r in &out.records {
        for &(j, v) in &r.entries {
            if j < p {
                acc[j] += v;
            }
        }
    }
    let t = out.records.len().max(1) as f64;
    Ok(acc.into_iter().map(|a| a / t).collect())
}

/// Fraction of stored iterations in which each coordinate is present.
pub fn inclusion_frequency(path: &Path, p: usize) -> Result<Vec<f64>> {
    let out = SparseChainReader::open(path)?.read_all()?;
    let mut acc = vec![0.0; p];
    for r in &out.records {
        for &(j, _) in &r.entries {
            if j < p {
                acc[j] += 1.0;
            }
        }
    }
    let t = out.records.len().max(1) as f64;
    Ok(acc.into_iter().map(|a| a / t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(iter: u64, e: &[(usize, f64)]) -> SparseChainRecord {
        SparseChainRecord { iter, entries: e.to_vec() }
    }

    #[test]
    fn round_trip_small_buffer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.sgb");
        let recs = vec![rec(1, &[(0, 1.5), (3, -2.0)]), rec(2, &[]), rec(3, &[(2, 0.25)])];
        let mut w = SparseChainWriter::with_capacity(&path, SparseKind::Beta, 4, 3).unwrap();
        for r in &recs {
            w.append(r).unwrap();
        }
        w.finish().unwrap();
        let out = SparseChainReader::open(&path).unwrap().read_all().unwrap();
        assert_eq!(out.records, recs);
        assert_eq!(out.truncated_at, None);
        assert_eq!(file_len(&path).unwrap(), HEADER_LEN + payload_size(3, 3));
        let t = read_coefficient_trace(&path, 0, None).unwrap();
        assert_eq!(t.values, vec![1.5, 0.0, 0.0]);
    }

    #[test]
    fn truncated_tail_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.sgb");
        let mut w = SparseChainWriter::create(&path, SparseKind::Beta, 4).unwrap();
        w.append(&rec(1, &[(0, 1.0)])).unwrap();
        w.append(&rec(2, &[(1, 2.0), (2, 3.0)])).unwrap();
        w.finish().unwrap();
        let len = file_len(&path).unwrap();
        let f = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(len - 8).unwrap();
        let out = SparseChainReader::open(&path).unwrap().read_all().unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.truncated_at, Some(HEADER_LEN + 32));
    }

    #[test]
    fn misplaced_sentinel_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.sgb");
        let mut f = File::create(&path).unwrap();
        Header { magic: *b"SGBC", p: 4, extra: 0 }.write(&mut f).unwrap();
        f.write_all(&1.0f64.to_le_bytes()).unwrap();
        f.write_all(&0i64.to_le_bytes()).unwrap();
        drop(f);
        let r = SparseChainReader::open(&path).unwrap().read_all();
        assert!(matches!(r, Err(Error::CorruptRecord { offset: 24, .. })));
    }

    #[test]
    fn rejects_iteration_zero() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = SparseChainWriter::create(&dir.path().join("b"), SparseKind::Beta, 2).unwrap();
        assert!(w.append(&rec(0, &[])).is_err());
        assert!(w.append(&rec(1, &[(2, 1.0)])).is_err());
    }
}
