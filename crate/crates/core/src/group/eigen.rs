use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen-reduced sufficient statistics of one group: eigenvalues D of the
/// weighted Gram matrix (descending), squared projections R of the
/// out-of-group residual correlation onto each eigenvector, and the squared
/// residual norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupEigen {
    pub eigenvalues: Vec<f64>,
    pub rotated_resid: Vec<f64>,
    pub s2: f64,
}

impl GroupEigen {
    /// Reduces a J x J Gram matrix G and correlation vector R = X_k' W r.
    pub fn from_gram(g: &DMatrix<f64>, r: &DVector<f64>, s2: f64) -> Result<Self> {
        let j = g.nrows();
        if g.ncols() != j || r.len() != j {
            return Err(Error::DimensionMismatch("group gram".into()));
        }
        if g.iter().chain(r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("group gram"));
        }
        let eig = SymmetricEigen::try_new(g.clone(), 1e-14, 10_000).ok_or(Error::EigenFailure)?;
        let mut order: Vec<usize> = (0..j).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let tol = 1e-12 * top.max(f64::MIN_POSITIVE) * j as f64;
        let mut eigenvalues = Vec::with_capacity(j);
        let mut rotated_resid = Vec::with_capacity(j);
        for &i in &order {
            let lam = eig.eigenvalues[i];
            if !lam.is_finite() {
                return Err(Error::EigenFailure);
            }
            let proj = eig.eigenvectors.column(i).dot(r);
            if lam > tol {
                eigenvalues.push(lam);
                rotated_resid.push(proj * proj);
            } else {
                eigenvalues.push(0.0);
                rotated_resid.push(0.0);
            }
        }
        Ok(Self { eigenvalues, rotated_resid, s2 })
    }

    /// Number of strictly positive eigenvalues.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&d| d > 0.0).count()
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Reduces weighted group columns `xsub` (n x J) and the weighted
/// out-of-group residual.
pub fn group_eigen_reduce(xsub: &DMatrix<f64>, resid: &[f64]) -> Result<GroupEigen> {
    if xsub.nrows() != resid.len() {
        return Err(Error::DimensionMismatch("group residual".into()));
    }
    let r = DVector::from_column_slice(resid);
    let g = xsub.transpose() * xsub;
    let xr = xsub.transpose() * &r;
    GroupEigen::from_gram(&g, &xr, r.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_gram() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let r = DVector::from_vec(vec![2.0, 1.0]);
        let e = GroupEigen::from_gram(&g, &r, 5.0).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 1.0]);
        assert!((e.rotated_resid[0] - 1.0).abs() < 1e-12);
        assert!((e.rotated_resid[1] - 4.0).abs() < 1e-12);
        assert_eq!(e.rank(), 2);
    }

    #[test]
    fn rank_deficient_group() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 0.0, 0.0]);
        let e = group_eigen_reduce(&x, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(e.rank(), 1);
        assert_eq!(e.eigenvalues[1], 0.0);
        assert!((e.s2 - 2.0).abs() < 1e-12);
        assert!((e.eigenvalues[0] - 10.0).abs() < 1e-10);
    }
}
