use std::collections::BTreeMap;

use super::{ActiveSet, DesignMatrix, ObservationWeights};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Entry {
    slot: usize,
    epoch: u64,
    last_used: u64,
}

/// Lazily filled columns of the weighted Gram matrix X'WX.
///
/// Columns live in one slab that grows `block_size` columns at a time. A
/// column whose weight epoch is older than the current one is recomputed on
/// the next `ensure_column`; columns unused for more than `eviction_age`
/// sweeps are released unless they are active.
#[derive(Debug, Clone)]
pub struct XtXCache {
    p: usize,
    block_size: usize,
    eviction_age: u64,
    slab: Vec<f64>,
    slots: usize,
    free: Vec<usize>,
    entries: BTreeMap<usize, Entry>,
    diag: Vec<f64>,
    diag_epoch: Option<u64>,
}

impl XtXCache {
    pub fn new(p: usize, block_size: usize, eviction_age: u64) -> Self {
        Self {
            p,
            block_size: block_size.max(1),
            eviction_age,
            slab: Vec::new(),
            slots: 0,
            free: Vec::new(),
            entries: BTreeMap::new(),
            diag: vec![0.0; p],
            diag_epoch: None,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of column slots currently allocated.
    pub fn capacity(&self) -> usize {
        self.slots
    }

    pub fn contains(&self, j: usize) -> bool {
        self.entries.contains_key(&j)
    }

    /// Returns column j of X'WX, computing it if absent or stale.
    pub fn ensure_column(
        &mut self,
        j: usize,
        x: &DesignMatrix,
        w: &ObservationWeights,
        iter: u64,
    ) -> Result<&[f64]> {
        if j >= self.p || x.p() != self.p || w.len() != x.n() {
            return Err(Error::DimensionMismatch(format!("cache column {j}")));
        }
        let epoch = w.epoch();
        let slot = match self.entries.get_mut(&j) {
            Some(e) if e.epoch == epoch => {
                e.last_used = e.last_used.max(iter);
                let s = e.slot;
                return Ok(&self.slab[s * self.p..(s + 1) * self.p]);
            }
            Some(e) => {
                e.epoch = epoch;
                e.last_used = e.last_used.max(iter);
                e.slot
            }
            None => {
                let slot = self.allocate();
                self.entries.insert(j, Entry { slot, epoch, last_used: iter });
                slot
            }
        };
        let p = self.p;
        let out = &mut self.slab[slot * p..(slot + 1) * p];
        fill_column(out, j, x, w);
        Ok(&self.slab[slot * p..(slot + 1) * p])
    }

    fn allocate(&mut self) -> usize {
        if let Some(s) = self.free.pop() {
            return s;
        }
        if self.entries.len() >= self.slots {
            let grow = self.block_size;
            self.slab.resize((self.slots + grow) * self.p, 0.0);
            self.free.extend((self.slots + 1..self.slots + grow).rev());
            self.slots += grow;
            return self.slots - grow;
        }
        unreachable!("free list out of sync with slab")
    }

    /// Cached column j, which must be fresh for `epoch`.
    pub fn column(&self, j: usize, epoch: u64) -> Result<&[f64]> {
        match self.entries.get(&j) {
            Some(e) if e.epoch == epoch => Ok(&self.slab[e.slot * self.p..(e.slot + 1) * self.p]),
            _ => Err(Error::MissingColumn(j)),
        }
    }

    pub fn get(&self, j: usize, k: usize, epoch: u64) -> Result<f64> {
        Ok(self.column(j, epoch)?[k])
    }

    pub fn touch(&mut self, j: usize, iter: u64) {
        if let Some(e) = self.entries.get_mut(&j) {
            e.last_used = e.last_used.max(iter);
        }
    }

    /// Releases columns idle for more than the eviction age that are not active.
    pub fn evict_stale(&mut self, iter: u64, active: &ActiveSet) -> usize {
        let age = self.eviction_age;
        let stale: Vec<usize> = self
            .entries
            .iter()
            .filter(|(j, e)| iter.saturating_sub(e.last_used) > age && !active.contains(**j))
            .map(|(j, _)| *j)
            .collect();
        for j in &stale {
            if let Some(e) = self.entries.remove(j) {
                self.free.push(e.slot);
            }
        }
        stale.len()
    }

    /// Recomputes the weighted squared column norms if the weights changed.
    pub fn refresh_diag(&mut self, x: &DesignMatrix, w: &ObservationWeights) {
        if self.diag_epoch == Some(w.epoch()) {
            return;
        }
        if w.is_unit() {
            self.diag.copy_from_slice(x.column_norms());
        } else {
            let ws = w.as_slice();
            for (j, d) in self.diag.iter_mut().enumerate() {
                *d = x.column(j).iter().zip(ws).map(|(a, b)| a * a * b).sum();
            }
        }
        self.diag_epoch = Some(w.epoch());
    }

    /// Weighted squared column norms; valid after `refresh_diag`.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

fn fill_column(out: &mut [f64], j: usize, x: &DesignMatrix, w: &ObservationWeights) {
    let xj = x.column(j);
    let v: Vec<f64> = if w.is_unit() {
        xj.to_vec()
    } else {
        xj.iter().zip(w.as_slice()).map(|(a, b)| a * b).collect()
    };
    for (k, o) in out.iter_mut().enumerate() {
        *o = x.column(k).iter().zip(&v).map(|(a, b)| a * b).sum();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> DesignMatrix {
        DesignMatrix::from_rows(&[
            vec![1.0, 0.0, 2.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![2.0, 0.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn columns_match_dense_product() {
        let x = design();
        let mut w = ObservationWeights::unit(4);
        w.set(vec![1.0, 2.0, 0.5, 1.5]).unwrap();
        let mut c = XtXCache::new(3, 2, 100);
        for j in 0..3 {
            let col = c.ensure_column(j, &x, &w, 1).unwrap().to_vec();
            for (k, v) in col.iter().enumerate() {
                let want: f64 = (0..4).map(|i| x.get(i, j) * x.get(i, k) * w.as_slice()[i]).sum();
                assert!((v - want).abs() < 1e-12);
            }
        }
        assert_eq!(c.capacity(), 4);
        c.refresh_diag(&x, &w);
        assert!((c.diag()[0] - (1.0 + 0.5 + 6.0)).abs() < 1e-12);
    }

    #[test]
    fn stale_epoch_is_missing_until_refreshed() {
        let x = design();
        let mut w = ObservationWeights::unit(4);
        let mut c = XtXCache::new(3, 16, 100);
        c.ensure_column(1, &x, &w, 0).unwrap();
        assert!(c.column(1, 0).is_ok());
        w.set(vec![2.0; 4]).unwrap();
        assert!(matches!(c.column(1, w.epoch()), Err(Error::MissingColumn(1))));
        let v = c.ensure_column(1, &x, &w, 1).unwrap()[1];
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn eviction_respects_age_and_activity() {
        let x = design();
        let w = ObservationWeights::unit(4);
        let mut c = XtXCache::new(3, 16, 10);
        c.ensure_column(0, &x, &w, 0).unwrap();
        c.ensure_column(2, &x, &w, 0).unwrap();
        let active = ActiveSet::from_unsorted(vec![2]);
        assert_eq!(c.evict_stale(10, &active), 0);
        assert_eq!(c.evict_stale(11, &active), 1);
        assert!(!c.contains(0));
        assert!(c.contains(2));
        c.ensure_column(1, &x, &w, 12).unwrap();
        assert_eq!(c.capacity(), 16);
    }
}
