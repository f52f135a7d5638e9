use super::{DesignMatrix, ObservationWeights, XtXCache};
use crate::error::{Error, Result};

/// The vector X'W(y - X beta), kept in sync with single-coordinate changes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidCorrelation {
    values: Vec<f64>,
}

impl ResidCorrelation {
    /// Full O(np) rebuild from the current coefficients.
    pub fn rebuild(
        x: &DesignMatrix,
        y: &[f64],
        beta: &[f64],
        w: &ObservationWeights,
    ) -> Result<Self> {
        if y.len() != x.n() || beta.len() != x.p() || w.len() != x.n() {
            return Err(Error::DimensionMismatch("residual rebuild".into()));
        }
        let fit = x.mul_vec(beta);
        let r: Vec<f64> = y
            .iter()
            .zip(&fit)
            .zip(w.as_slice())
            .map(|((y, f), w)| w * (y - f))
            .collect();
        Ok(Self { values: x.tmul_vec(&r) })
    }

    /// Applies beta_j += delta using the cached Gram column j.
    pub fn update_after_coordinate(
        &mut self,
        j: usize,
        delta: f64,
        cache: &XtXCache,
        epoch: u64,
    ) -> Result<()> {
        if delta == 0.0 {
            return Ok(());
        }
        let col = cache.column(j, epoch)?;
        for (v, g) in self.values.iter_mut().zip(col) {
            *v -= delta * g;
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn incremental_matches_rebuild() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (n, p) = (12, 6);
        let vals: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>() - 0.5).collect();
        let x = DesignMatrix::from_column_major(n, p, vals).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut w = ObservationWeights::unit(n);
        w.set((0..n).map(|_| 0.5 + rng.random::<f64>()).collect()).unwrap();
        let mut beta = vec![0.0; p];
        let mut rc = ResidCorrelation::rebuild(&x, &y, &beta, &w).unwrap();
        let mut cache = XtXCache::new(p, 16, 100);
        for step in 0..200 {
            let j = rng.random_range(0..p);
            let delta = rng.random::<f64>() - 0.5;
            cache.ensure_column(j, &x, &w, step).unwrap();
            rc.update_after_coordinate(j, delta, &cache, w.epoch()).unwrap();
            beta[j] += delta;
        }
        let fresh = ResidCorrelation::rebuild(&x, &y, &beta, &w).unwrap();
        for (a, b) in rc.values().iter().zip(fresh.values()) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        let empty = XtXCache::new(p, 16, 100);
        assert!(matches!(
            rc.update_after_coordinate(0, 1.0, &empty, w.epoch()),
            Err(Error::MissingColumn(0))
        ));
    }
}
