//! Binary chain files.
//!
//! Every file starts with a 24-byte header: 4-byte magic, u32 version, u64
//! dimension p and a u64 kind-specific field. Sparse chain files then hold
//! 16-byte (f64 value, i64 index) pairs: each record is a sentinel pair
//! (-t, -count) followed by `count` (value, coordinate) pairs. All integers
//! and floats are little-endian.

mod energy;
mod scalars;
mod sparse;
mod unbounded;

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub use energy::{read_energy, EnergyEntry, EnergyIndex, EnergyWriter};
pub use scalars::{read_scalars, ScalarRecord, ScalarWriter};
pub use sparse::{
    compute_mips, inclusion_frequency, payload_size, read_coefficient_trace, CoefficientTrace,
    ReadOutcome, SparseChainReader, SparseChainRecord, SparseChainWriter, SparseKind,
};
pub use unbounded::{UnboundedReader, UnboundedWriter};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 24;
pub const PAIR_LEN: u64 = 16;
pub const DEFAULT_BUFFER_PAIRS: usize = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Header {
    pub magic: [u8; 4],
    pub p: u64,
    pub extra: u64,
}

impl Header {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.magic)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.p.to_le_bytes())?;
        w.write_all(&self.extra.to_le_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R, expect: &[&[u8; 4]]) -> Result<Self> {
        let mut buf = [0u8; 24];
        r.read_exact(&mut buf).map_err(|_| Error::CorruptRecord {
            offset: 0,
            reason: "missing file header".into(),
        })?;
        let magic: [u8; 4] = buf[0..4].try_into().unwrap();
        if !expect.iter().any(|m| **m == magic) {
            return Err(Error::CorruptRecord { offset: 0, reason: "bad magic".into() });
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::CorruptRecord {
                offset: 4,
                reason: format!("unsupported version {version}"),
            });
        }
        Ok(Self {
            magic,
            p: u64::from_le_bytes(buf[8..16].try_into().unwrap()),
            extra: u64::from_le_bytes(buf[16..24].try_into().unwrap()),
        })
    }
}

/// Paths of the files written by one chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainFileSet {
    pub dir: PathBuf,
}

impl ChainFileSet {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let s = Self::new(dir);
        std::fs::create_dir_all(&s.dir)?;
        Ok(s)
    }

    pub fn beta(&self) -> PathBuf {
        self.dir.join("beta.sgb")
    }

    pub fn tau(&self) -> PathBuf {
        self.dir.join("tau.sgb")
    }

    pub fn mip(&self) -> PathBuf {
        self.dir.join("mip.sgb")
    }

    pub fn energy(&self) -> PathBuf {
        self.dir.join("energy.sgb")
    }

    pub fn energy_sorted(&self) -> PathBuf {
        self.dir.join("energy_sorted.sgb")
    }

    pub fn scalars(&self) -> PathBuf {
        self.dir.join("scalars.sgb")
    }

    pub fn unbounded(&self) -> PathBuf {
        self.dir.join("unbounded.sgb")
    }

    /// Switching-chain trace of group `k`.
    pub fn switch_trace(&self, k: usize) -> PathBuf {
        self.dir.join(format!("switch_g{k}.csv"))
    }
}

pub(crate) fn file_len(path: &Path) -> Result<u64> {
    Ok(File::open(path)?.metadata()?.len())
}
