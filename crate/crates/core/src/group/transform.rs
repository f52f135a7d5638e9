use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Maps J-1 free coefficients onto J coefficients that sum to zero.
///
/// The J x (J-1) matrix has orthogonal columns with M'M = J/(J-1) I, so the
/// inverse map on the zero-sum subspace is (J-1)/J M'.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSumTransform {
    j: usize,
    m: DMatrix<f64>,
}

impl ZeroSumTransform {
    pub fn new(j: usize) -> Result<Self> {
        if j < 2 {
            return Err(Error::GroupTooSmall(j));
        }
        let jf = j as f64;
        let d = 1.0 / (jf - 1.0).sqrt();
        let b = (jf.sqrt() - 1.0) / (jf - 1.0).powf(1.5);
        let c = (jf - 2.0) * b + d;
        let m = DMatrix::from_fn(j, j - 1, |row, col| {
            if row == j - 1 {
                -d
            } else if row == col {
                c
            } else {
                -b
            }
        });
        Ok(Self { j, m })
    }

    pub fn group_size(&self) -> usize {
        self.j
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Original-space coefficients M beta'.
    pub fn to_original(&self, working: &[f64]) -> Vec<f64> {
        (0..self.j)
            .map(|r| working.iter().enumerate().map(|(c, w)| self.m[(r, c)] * w).sum())
            .collect()
    }

    /// Working coefficients (J-1)/J M' beta for a zero-sum beta.
    pub fn to_working(&self, original: &[f64]) -> Vec<f64> {
        let s = (self.j as f64 - 1.0) / self.j as f64;
        (0..self.j - 1)
            .map(|c| s * original.iter().enumerate().map(|(r, o)| self.m[(r, c)] * o).sum::<f64>())
            .collect()
    }
}
