//! Fixed-effect updates: collapsed inclusion draws, the joint Gaussian
//! coefficient draw over the active set, and the conjugate hyperparameter
//! updates for sigma2, pi and the slab variance.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::dist;
use crate::error::{Error, Result};
use crate::model::{ResidCorrelation, XtXCache};

fn check_inputs(r: f64, s: f64, sigma2: f64, tau2: f64) -> Result<()> {
    if !r.is_finite() || !s.is_finite() || s < 0.0 {
        return Err(Error::NonFiniteInput("collapsed odds: correlation or norm"));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0 && tau2.is_finite() && tau2 > 0.0) {
        return Err(Error::NonFiniteInput("collapsed odds: variances"));
    }
    Ok(())
}

/// Log Bayes factor for including coordinate j with beta_j integrated out.
///
/// `r` is x_j'W(y - X beta_{-j}) and `s` the weighted squared norm of x_j.
pub fn collapsed_log_odds(r: f64, s: f64, sigma2: f64, tau2: f64) -> Result<f64> {
    check_inputs(r, s, sigma2, tau2)?;
    let rs = r / sigma2;
    let prec = s / sigma2 + 1.0 / tau2;
    Ok(-0.5 * (tau2 * s / sigma2).ln_1p() + 0.5 * rs * rs / prec)
}

/// P(B_j = 1) given collapsed log odds and prior inclusion probability,
/// with the prior odds raised to 1/t.
pub fn inclusion_probability(log_odds: f64, pi: f64, t: f64) -> f64 {
    if pi <= 0.0 {
        return 0.0;
    }
    if pi >= 1.0 {
        return 1.0;
    }
    let z = log_odds + (pi.ln() - (-pi).ln_1p()) / t;
    dist::logistic(z)
}

pub fn draw_inclusion<R: Rng + ?Sized>(log_odds: f64, pi: f64, rng: &mut R) -> bool {
    draw_with_probability(inclusion_probability(log_odds, pi, 1.0), rng)
}

pub fn draw_with_probability<R: Rng + ?Sized>(prob: f64, rng: &mut R) -> bool {
    if prob >= 1.0 {
        return true;
    }
    if prob <= 0.0 {
        return false;
    }
    rng.random::<f64>() < prob
}

/// Mean and variance of beta_j given everything else (before tempering).
pub fn coordinate_conditional(r: f64, s: f64, sigma2: f64, tau2: f64) -> (f64, f64) {
    let q = s + sigma2 / tau2;
    (r / q, sigma2 / q)
}

/// Draws x ~ N(Q^-1 m, sigma2 Q^-1) for symmetric positive definite Q.
///
/// A jitter of 1e-10 * trace(Q) / dim is added once if the first
/// factorisation fails.
pub fn gaussian_block_draw<R: Rng + ?Sized>(
    q: DMatrix<f64>,
    m: &DVector<f64>,
    sigma2: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let d = q.nrows();
    if q.ncols() != d || m.len() != d {
        return Err(Error::DimensionMismatch("block draw".into()));
    }
    if q.iter().chain(m.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("block draw"));
    }
    let chol = match Cholesky::new(q.clone()) {
        Some(c) => c,
        None => {
            let jitter = 1e-10 * q.trace() / d as f64;
            let mut qj = q;
            for i in 0..d {
                qj[(i, i)] += jitter;
            }
            Cholesky::new(qj).ok_or(Error::NotPositiveDefinite)?
        }
    };
    let mean = chol.solve(m);
    let z = DVector::from_fn(d, |_, _| dist::std_normal(rng));
    let lt = chol.l().transpose();
    let noise = lt.solve_upper_triangular(&z).ok_or(Error::NotPositiveDefinite)?;
    Ok(mean + noise * sigma2.sqrt())
}

/// Joint draw of the active coefficients in blocks of at most `block_limit`.
///
/// `prior_prec[i]` is sigma2 / tau2 for `active[i]`. The draw uses variance
/// `sigma2_eff` (T sigma2 when tempered). `resid` is kept in sync with
/// every change; all active columns must be fresh in `cache`.
#[allow(clippy::too_many_arguments)]
pub fn draw_active_beta<R: Rng + ?Sized>(
    active: &[usize],
    prior_prec: &[f64],
    cache: &XtXCache,
    epoch: u64,
    resid: &mut ResidCorrelation,
    beta: &mut [f64],
    sigma2_eff: f64,
    block_limit: usize,
    rng: &mut R,
) -> Result<()> {
    if active.len() != prior_prec.len() {
        return Err(Error::DimensionMismatch("active set and prior precision".into()));
    }
    for (chunk, prec) in active.chunks(block_limit.max(1)).zip(prior_prec.chunks(block_limit.max(1))) {
        let d = chunk.len();
        let mut q = DMatrix::zeros(d, d);
        for (a, &j) in chunk.iter().enumerate() {
            let col = cache.column(j, epoch)?;
            for (b, &k) in chunk.iter().enumerate() {
                q[(b, a)] = col[k];
            }
            q[(a, a)] += prec[a];
        }
        let m = DVector::from_fn(d, |a, _| {
            let j = chunk[a];
            let gb: f64 = chunk.iter().enumerate().map(|(b, &k)| q[(a, b)] * beta[k]).sum::<f64>()
                - prec[a] * beta[j];
            resid.get(j) + gb
        });
        let draw = gaussian_block_draw(q, &m, sigma2_eff, rng)?;
        for (a, &j) in chunk.iter().enumerate() {
            let delta = draw[a] - beta[j];
            resid.update_after_coordinate(j, delta, cache, epoch)?;
            beta[j] = draw[a];
        }
    }
    Ok(())
}

/// Inputs to the sigma2 conditional.
#[derive(Debug, Clone, Copy)]
pub struct Sigma2Conditional {
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub n: usize,
    /// Prior degrees of freedom and scale of the scaled inverse chi-square.
    pub prior_dof: f64,
    pub prior_scale: f64,
    /// sum beta^2 / tau2_rel and the number of terms when the slab is
    /// sigma2-relative.
    pub relative_slab: Option<(f64, usize)>,
}

impl Sigma2Conditional {
    /// Inverse-gamma (shape, scale) of the conditional with the likelihood
    /// raised to 1/t.
    pub fn inv_gamma_params(&self, t: f64) -> (f64, f64) {
        let (extra_ss, extra_k) = self.relative_slab.unwrap_or((0.0, 0));
        let shape = 0.5 * (self.n as f64 / t + self.prior_dof + extra_k as f64);
        let scale = 0.5 * (self.rss / t + self.prior_dof * self.prior_scale + extra_ss);
        (shape, scale)
    }
}

pub fn update_sigma2<R: Rng + ?Sized>(c: &Sigma2Conditional, t: f64, rng: &mut R) -> Result<f64> {
    if !c.rss.is_finite() || c.rss < 0.0 {
        return Err(Error::NonFiniteInput("residual sum of squares"));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::NonFiniteInput("temperature"));
    }
    let (shape, scale) = c.inv_gamma_params(t);
    Ok(dist::inv_gamma(shape, scale, rng))
}

/// Beta conditional for the shared inclusion probability given `k` of
/// `total` eligible coordinates active, with the indicator prior raised
/// to 1/t.
pub fn update_pi<R: Rng + ?Sized>(k: usize, total: usize, a: f64, b: f64, t: f64, rng: &mut R) -> f64 {
    dist::beta(a + k as f64 / t, b + (total - k) as f64 / t, rng).clamp(1e-300, 1.0 - 1e-16)
}

/// Slab variance update (sum beta^2 / scale_div + scale) / Gamma(k + shape).
pub fn update_tau_f2<R: Rng + ?Sized>(
    sum_sq: f64,
    k: usize,
    shape: f64,
    scale: f64,
    rng: &mut R,
) -> f64 {
    dist::inv_gamma(k as f64 + shape, sum_sq + scale, rng)
}
