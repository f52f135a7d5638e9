use crate::error::{Error, Result};

/// Dense column-major n x p design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    column_norms: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_column_major(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::DimensionMismatch(format!("empty design {n}x{p}")));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for {n}x{p}, got {}",
                n * p,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("design matrix"));
        }
        let column_norms = values
            .chunks_exact(n)
            .map(|c| c.iter().map(|v| v * v).sum())
            .collect();
        Ok(Self { n, p, values, column_norms })
    }

    /// Builds from row-major observations (one inner vector per row).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let mut values = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                values[j * n + i] = *v;
            }
        }
        Self::from_column_major(n, p, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Unweighted squared column norms.
    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    /// Computes X beta, skipping zero coefficients.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (o, x) in out.iter_mut().zip(self.column(j)) {
                    *o += b * x;
                }
            }
        }
        out
    }

    /// Computes X' v.
    pub fn tmul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.values
            .chunks_exact(self.n)
            .map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Per-observation weights. The epoch increases every time the weights
/// change so cached weighted products can be invalidated lazily.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWeights {
    values: Vec<f64>,
    epoch: u64,
    unit: bool,
}

impl ObservationWeights {
    pub fn unit(n: usize) -> Self {
        Self { values: vec![1.0; n], epoch: 0, unit: true }
    }

    pub fn set(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch("weight vector length".into()));
        }
        if values.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::NonFiniteInput("observation weights"));
        }
        self.values = values;
        self.epoch += 1;
        self.unit = false;
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn is_unit(&self) -> bool {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
