//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use spikegibbs::dist;
use spikegibbs::DesignMatrix;

/// Adaptive Simpson quadrature of `f` on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integral of exp(g) over [a, b], computed relative to exp(g(peak)) so the
/// integrand is O(1) near its maximum. Returns the log of the integral.
pub fn log_integral<F: Fn(f64) -> f64>(g: F, a: f64, b: f64, peak: f64, rel_tol: f64) -> f64 {
    let top = g(peak);
    let h = |x: f64| (g(x) - top).exp();
    // split at the peak so the quadrature sees it as an endpoint
    let v = adaptive_simpson(&h, a, peak, rel_tol) + adaptive_simpson(&h, peak, b, rel_tol);
    top + v.ln()
}

/// Grid maximiser of `g` on [a, b], refined by golden-section search.
pub fn argmax<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64) -> f64 {
    let n = 2000;
    let mut best = (a, f64::NEG_INFINITY);
    for i in 0..=n {
        let x = a + (b - a) * i as f64 / n as f64;
        let v = g(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let h = (b - a) / n as f64;
    let (mut lo, mut hi) = ((best.0 - h).max(a), (best.0 + h).min(b));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = hi - r * (hi - lo);
        let x2 = lo + r * (hi - lo);
        if g(x1) < g(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    0.5 * (lo + hi)
}

pub fn to_dense(x: &DesignMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(x.n(), x.p(), x.values())
}

pub fn random_design<R: Rng>(n: usize, p: usize, rng: &mut R) -> DesignMatrix {
    let v: Vec<f64> = (0..n * p).map(|_| dist::std_normal(rng)).collect();
    DesignMatrix::from_column_major(n, p, v).unwrap()
}

/// log N(y; 0, sigma2 I + X_S diag(tau2) X_S') via LU determinant and solve.
pub fn log_marginal(x: &DMatrix<f64>, y: &[f64], support: &[usize], tau2: &[f64], sigma2: f64) -> f64 {
    let n = x.nrows();
    let mut c = DMatrix::<f64>::identity(n, n) * sigma2;
    for (&j, &t) in support.iter().zip(tau2) {
        let col = x.column(j);
        c += col * col.transpose() * t;
    }
    let yv = DVector::from_column_slice(y);
    let lu = c.clone().lu();
    let det = lu.determinant();
    let q = yv.dot(&lu.solve(&yv).unwrap());
    -0.5 * (n as f64 * dist::LN_2PI + det.ln() + q)
}

/// Exact marginal inclusion probabilities of every coordinate by summing
/// over all 2^p models with fixed sigma2, slab variance and pi. At
/// temperature t the likelihood and the indicator prior are raised to 1/t,
/// which is the same as noise variance t sigma2 and prior odds to the 1/t.
pub fn enumerate_mips(x: &DMatrix<f64>, y: &[f64], sigma2: f64, tau2: f64, pi: f64, t: f64) -> Vec<f64> {
    let p = x.ncols();
    let mut logw = Vec::with_capacity(1 << p);
    for m in 0..(1usize << p) {
        let support: Vec<usize> = (0..p).filter(|j| m >> j & 1 == 1).collect();
        let k = support.len() as f64;
        let lm = log_marginal(x, y, &support, &vec![tau2; support.len()], t * sigma2);
        logw.push(lm + (k * pi.ln() + (p as f64 - k) * (-pi).ln_1p()) / t);
    }
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    (0..p)
        .map(|j| (0..w.len()).filter(|m| m >> j & 1 == 1).map(|m| w[m]).sum::<f64>() / z)
        .collect()
}

/// Random record sequences: consecutive iteration ids from 1, up to `p`
/// distinct sorted coordinates per record, arbitrary f64 bit patterns.
pub fn record_sequences(p: usize) -> impl proptest::strategy::Strategy<Value = Vec<spikegibbs::SparseChainRecord>> {
    use proptest::prelude::*;
    let record = proptest::collection::btree_map(0..p, any::<u64>().prop_map(f64::from_bits), 0..p.min(12));
    proptest::collection::vec(record, 0..40).prop_map(|recs| {
        recs.into_iter()
            .enumerate()
            .map(|(i, m)| spikegibbs::SparseChainRecord { iter: i as u64 + 1, entries: m.into_iter().collect() })
            .collect()
    })
}

/// Writes `recs` with the given buffer capacity and checks bitwise identity
/// of the read-back records and the exact file size.
pub fn storage_round_trip(recs: &[spikegibbs::SparseChainRecord], p: usize, capacity: usize) -> Result<(), String> {
    use spikegibbs::store::{payload_size, SparseKind, HEADER_LEN};
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("beta.sgb");
    let mut w = spikegibbs::SparseChainWriter::with_capacity(&path, SparseKind::Beta, p, capacity).map_err(|e| e.to_string())?;
    for r in recs {
        w.append(r).map_err(|e| e.to_string())?;
    }
    w.finish().map_err(|e| e.to_string())?;
    let out = spikegibbs::SparseChainReader::open(&path).and_then(|r| r.read_all()).map_err(|e| e.to_string())?;
    if out.truncated_at.is_some() || out.records.len() != recs.len() {
        return Err(format!("read {} of {} records", out.records.len(), recs.len()));
    }
    let bits = |r: &spikegibbs::SparseChainRecord| -> (u64, Vec<(usize, u64)>) {
        (r.iter, r.entries.iter().map(|(j, v)| (*j, v.to_bits())).collect())
    };
    if let Some(i) = (0..recs.len()).find(|&i| bits(&recs[i]) != bits(&out.records[i])) {
        return Err(format!("record {i} differs"));
    }
    let entries: u64 = recs.iter().map(|r| r.entries.len() as u64).sum();
    let len = std::fs::metadata(&path).map_err(|e| e.to_string())?.len();
    let want = HEADER_LEN + payload_size(recs.len() as u64, entries);
    if len != want {
        return Err(format!("file size {len}, formula {want}"));
    }
    Ok(())
}
