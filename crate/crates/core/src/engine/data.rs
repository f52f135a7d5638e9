use crate::error::{Error, Result};
use crate::group::{GroupTauPrior, ZeroSumTransform};
use crate::model::DesignMatrix;

use super::config::GroupDef;

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Continuous(Vec<f64>),
    Binary(Vec<bool>),
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Continuous(v) => v.len(),
            Response::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn variance(&self) -> f64 {
        let v: Vec<f64> = match self {
            Response::Continuous(v) => v.clone(),
            Response::Binary(b) => b.iter().map(|&z| f64::from(u8::from(z))).collect(),
        };
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0)
    }
}

/// Where a working column comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    /// An ungrouped original coordinate (or a single-member group).
    Fixed { orig: usize },
    /// Column `local` of group `group` in its working parameterisation.
    Group { group: usize, local: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupLayout {
    pub members: Vec<usize>,
    /// Working columns, in local order.
    pub cols: Vec<usize>,
    pub transform: Option<ZeroSumTransform>,
    pub pi_a: f64,
    pub prior: GroupTauPrior,
}

/// Slab prior of a single-member group handled by the fixed-effect sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingletonSlab {
    pub pi_a: f64,
    pub dof: f64,
    pub scale: f64,
}

/// Data in the working parameterisation: grouped columns are kept
/// contiguous, and zero-sum groups are replaced by their J-1 transformed
/// columns.
#[derive(Debug, Clone)]
pub struct ModelData {
    pub x: DesignMatrix,
    pub response: Response,
    pub p_orig: usize,
    pub columns: Vec<ColumnKind>,
    /// Working index of each original ungrouped coordinate.
    pub orig_to_work: Vec<Option<usize>>,
    pub fixed_cols: Vec<usize>,
    /// Multi-member groups in configuration order; single-member groups
    /// are excluded and numbering skips them.
    pub groups: Vec<GroupLayout>,
    pub singletons: Vec<Option<SingletonSlab>>,
    pub var_y: f64,
}

impl ModelData {
    pub fn new(x: &DesignMatrix, response: Response, groups: &[GroupDef]) -> Result<Self> {
        let (n, p) = (x.n(), x.p());
        if response.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "response has {} rows, design has {n}",
                response.len()
            )));
        }
        if let Response::Continuous(y) = &response {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput("response"));
            }
        }
        let mut owner: Vec<Option<usize>> = vec![None; p];
        for (k, g) in groups.iter().enumerate() {
            for &m in &g.members {
                if m >= p || owner[m].is_some() {
                    return Err(Error::Config(format!("bad group member {m}")));
                }
                owner[m] = Some(k);
            }
        }
        let mut values: Vec<f64> = Vec::with_capacity(n * p);
        let mut columns = Vec::new();
        let mut singletons = Vec::new();
        let mut orig_to_work = vec![None; p];
        // Singleton groups become fixed columns; the rest are numbered in order.
        let mut compact = vec![None; groups.len()];
        let mut n_multi = 0;
        for (k, g) in groups.iter().enumerate() {
            if g.members.len() > 1 {
                compact[k] = Some(n_multi);
                n_multi += 1;
            }
        }
        let mut layouts: Vec<Option<GroupLayout>> = vec![None; n_multi];
        for j in 0..p {
            let single = owner[j].filter(|&k| groups[k].members.len() == 1);
            match owner[j] {
                Some(gk) if single.is_none() => {
                    let k = compact[gk].expect("multi-member group");
                    if layouts[k].is_some() {
                        continue;
                    }
                    let g = &groups[gk];
                    let mut members = g.members.clone();
                    members.sort_unstable();
                    let transform = if g.zero_sum { Some(ZeroSumTransform::new(members.len())?) } else { None };
                    let width = if g.zero_sum { members.len() - 1 } else { members.len() };
                    let mut cols = Vec::with_capacity(width);
                    for local in 0..width {
                        let w = columns.len();
                        match &transform {
                            Some(t) => {
                                let m = t.matrix();
                                let mut col = vec![0.0; n];
                                for (r, &orig) in members.iter().enumerate() {
                                    let c = m[(r, local)];
                                    for (o, v) in col.iter_mut().zip(x.column(orig)) {
                                        *o += c * v;
                                    }
                                }
                                values.extend_from_slice(&col);
                            }
                            None => values.extend_from_slice(x.column(members[local])),
                        }
                        columns.push(ColumnKind::Group { group: k, local });
                        singletons.push(None);
                        cols.push(w);
                    }
                    layouts[k] = Some(GroupLayout { members, cols, transform, pi_a: g.pi_a, prior: g.tau_prior });
                }
                _ => {
                    orig_to_work[j] = Some(columns.len());
                    values.extend_from_slice(x.column(j));
                    columns.push(ColumnKind::Fixed { orig: j });
                    singletons.push(single.map(|k| {
                        let g = &groups[k];
                        let (dof, scale) = match g.tau_prior {
                            GroupTauPrior::InvChiSq { dof, scale } => (dof, scale),
                            GroupTauPrior::Flat => (0.0, 0.0),
                        };
                        SingletonSlab { pi_a: g.pi_a, dof, scale }
                    }));
                }
            }
        }
        let pw = columns.len();
        let fixed_cols = (0..pw).filter(|&w| matches!(columns[w], ColumnKind::Fixed { .. })).collect();
        let var_y = response.variance();
        Ok(Self {
            x: DesignMatrix::from_column_major(n, pw, values)?,
            response,
            p_orig: p,
            columns,
            orig_to_work,
            fixed_cols,
            groups: layouts.into_iter().map(|l| l.expect("every group has members")).collect(),
            singletons,
            var_y,
        })
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    /// Number of working columns.
    pub fn p_work(&self) -> usize {
        self.x.p()
    }

    /// Sparse original-space coefficients (coordinate, value), ascending.
    pub fn to_original(&self, beta: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (w, kind) in self.columns.iter().enumerate() {
            if let ColumnKind::Fixed { orig } = kind {
                if beta[w] != 0.0 {
                    out.push((*orig, beta[w]));
                }
            }
        }
        for g in &self.groups {
            let wv: Vec<f64> = g.cols.iter().map(|&c| beta[c]).collect();
            if wv.iter().all(|v| *v == 0.0) {
                continue;
            }
            let ov = match &g.transform {
                Some(t) => t.to_original(&wv),
                None => wv,
            };
            for (m, v) in g.members.iter().zip(ov) {
                if v != 0.0 {
                    out.push((*m, v));
                }
            }
        }
        out.sort_by_key(|e| e.0);
        out
    }

    /// Working coefficients from sparse original-space entries.
    pub fn to_working(&self, entries: &[(usize, f64)]) -> Vec<f64> {
        let mut orig = vec![0.0; self.p_orig];
        for &(j, v) in entries {
            orig[j] = v;
        }
        let mut beta = vec![0.0; self.p_work()];
        for (w, kind) in self.columns.iter().enumerate() {
            if let ColumnKind::Fixed { orig: j } = kind {
                beta[w] = orig[*j];
            }
        }
        for g in &self.groups {
            let ov: Vec<f64> = g.members.iter().map(|&m| orig[m]).collect();
            let wv = match &g.transform {
                Some(t) => t.to_working(&ov),
                None => ov,
            };
            for (c, v) in g.cols.iter().zip(wv) {
                beta[*c] = v;
            }
        }
        beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_maps() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..5).map(|j| (i * 5 + j) as f64 % 7.0).collect()).collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let groups = vec![
            GroupDef { members: vec![3, 1, 2], zero_sum: true, pi_a: 0.5, tau_prior: GroupTauPrior::default() },
            GroupDef { members: vec![4], zero_sum: false, pi_a: 0.3, tau_prior: GroupTauPrior::default() },
        ];
        let d = ModelData::new(&x, Response::Continuous(vec![0.0; 6]), &groups).unwrap();
        assert_eq!(d.p_work(), 4);
        assert_eq!(d.columns[0], ColumnKind::Fixed { orig: 0 });
        assert_eq!(d.columns[1], ColumnKind::Group { group: 0, local: 0 });
        assert_eq!(d.columns[3], ColumnKind::Fixed { orig: 4 });
        assert!(d.singletons[3].is_some());
        assert_eq!(d.fixed_cols, vec![0, 3]);
        let beta = vec![1.0, 0.5, -0.25, 2.0];
        let orig = d.to_original(&beta);
        let s: f64 = orig.iter().filter(|(j, _)| (1..4).contains(j)).map(|e| e.1).sum();
        assert!(s.abs() < 1e-12);
        let back = d.to_working(&orig);
        for (a, b) in back.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-12);
        }
        // X_work beta equals X beta_orig
        let mut dense = vec![0.0; 5];
        for (j, v) in orig {
            dense[j] = v;
        }
        let (a, b) = (d.x.mul_vec(&beta), x.mul_vec(&dense));
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
