//! Observation noise models: Gaussian, Student-t (scale mixture of normals),
//! robit (t-link binary) and the logistic approximation via robit plus
//! importance weights.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dist;
use crate::error::{Error, Result};
use crate::slice::SliceSampler;

/// Degrees of freedom and scale of the robit link that best matches the
/// logistic link.
pub const LOGISTIC_ROBIT_NU: f64 = 9.0;

pub fn logistic_robit_sigma() -> f64 {
    (7.0 * std::f64::consts::PI * std::f64::consts::PI / 27.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum NoiseKind {
    #[default]
    Gaussian,
    StudentT { nu: f64 },
    Robit { nu: f64 },
    Logistic,
}


impl NoiseKind {
    pub fn is_binary(&self) -> bool {
        matches!(self, NoiseKind::Robit { .. } | NoiseKind::Logistic)
    }

    /// Degrees of freedom of the t mixture, if any.
    pub fn nu(&self) -> Option<f64> {
        match *self {
            NoiseKind::Gaussian => None,
            NoiseKind::StudentT { nu } | NoiseKind::Robit { nu } => Some(nu),
            NoiseKind::Logistic => Some(LOGISTIC_ROBIT_NU),
        }
    }

    /// Fixed noise scale for binary models.
    pub fn fixed_sigma(&self) -> Option<f64> {
        match self {
            NoiseKind::Robit { .. } => Some(1.0),
            NoiseKind::Logistic => Some(logistic_robit_sigma()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.nu() {
            Some(nu) if !(nu.is_finite() && nu > 0.0) => {
                Err(Error::Config("noise degrees of freedom must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    /// Parses `gaussian`, `t:NU`, `robit:NU` or `logistic`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("noise must be gaussian, t:NU, robit:NU or logistic, got {s:?}"));
        let nu = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let kind = match s.trim().split_once(':') {
            None if s.trim() == "gaussian" => NoiseKind::Gaussian,
            None if s.trim() == "logistic" => NoiseKind::Logistic,
            Some(("t", v)) => NoiseKind::StudentT { nu: nu(v)? },
            Some(("robit", v)) => NoiseKind::Robit { nu: nu(v)? },
            _ => return Err(bad()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Draws the t-mixture precision weights given residuals y - X beta, with
/// the normal mixture component raised to 1/t.
pub fn draw_t_weights<R: Rng + ?Sized>(
    resid: &[f64],
    sigma2: f64,
    nu: f64,
    t: f64,
    rng: &mut R,
) -> Vec<f64> {
    resid
        .iter()
        .map(|r| {
            let (shape, rate) = (0.5 * nu + 0.5 / t, 0.5 * (r * r / (t * sigma2) + nu));
            dist::gamma(shape, rate, rng).max(1e-300)
        })
        .collect()
}

/// Log-likelihood of residuals under scaled t noise.
pub fn t_log_likelihood(resid: &[f64], sigma2: f64, nu: f64) -> f64 {
    let s = sigma2.sqrt();
    resid.iter().map(|r| dist::student_t_ln_pdf(r / s, nu) - s.ln()).sum()
}

/// Log-likelihood of the t-noise model with each normal mixture component
/// raised to 1/t and the weights integrated out. Equals `t_log_likelihood`
/// at t = 1.
pub fn tempered_t_log_likelihood(resid: &[f64], sigma2: f64, nu: f64, t: f64) -> f64 {
    let h = 0.5 * nu;
    let a = h + 0.5 / t;
    let k = h * h.ln() - ln_gamma(h) + ln_gamma(a) - 0.5 / t * (dist::LN_2PI + sigma2.ln());
    resid.iter().map(|r| k - a * (h + 0.5 * r * r / (t * sigma2)).ln()).sum()
}

const ROBIT_GRID: usize = 480;
const ROBIT_LOG_W: (f64, f64) = (-30.0, 6.0);

/// Robit log-likelihood with the latent normal component raised to 1/t,
/// latents and weights integrated out. The weight integral is a trapezoid
/// rule in log w; equals `robit_log_likelihood` at t = 1 up to quadrature
/// error.
pub fn tempered_robit_log_likelihood(eta: &[f64], z: &[bool], sigma: f64, nu: f64, t: f64) -> f64 {
    if t == 1.0 {
        return robit_log_likelihood(eta, z, sigma, nu);
    }
    let h = 0.5 * nu;
    let sigma2 = sigma * sigma;
    let k = h * h.ln() - ln_gamma(h) - 0.5 / t * (dist::LN_2PI + sigma2.ln())
        + 0.5 * (dist::LN_2PI + (t * sigma2).ln());
    let expo = h + 0.5 / t - 0.5;
    let (lo, hi) = ROBIT_LOG_W;
    let step = (hi - lo) / ROBIT_GRID as f64;
    let scale = 1.0 / (t.sqrt() * sigma);
    let mut terms = vec![0.0; ROBIT_GRID + 1];
    eta.iter()
        .zip(z)
        .map(|(&e, &zi)| {
            let m = if zi { e * scale } else { -e * scale };
            for (i, g) in terms.iter_mut().enumerate() {
                let u = lo + step * i as f64;
                let w = u.exp();
                *g = expo * u - h * w + dist::std_normal_ln_cdf(m * w.sqrt());
            }
            terms[0] -= std::f64::consts::LN_2;
            terms[ROBIT_GRID] -= std::f64::consts::LN_2;
            let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = terms.iter().map(|g| (g - top).exp()).sum();
            k + top + (sum * step).ln()
        })
        .sum()
}

/// log P(z | eta) under the robit link with scale `sigma`.
pub fn robit_log_likelihood(eta: &[f64], z: &[bool], sigma: f64, nu: f64) -> f64 {
    eta.iter()
        .zip(z)
        .map(|(e, &zi)| {
            let v = if zi { e / sigma } else { -e / sigma };
            ln_t_cdf(v, nu)
        })
        .sum()
}

fn ln_t_cdf(x: f64, nu: f64) -> f64 {
    if x > 0.0 {
        (-dist::student_t_cdf(-x, nu)).ln_1p()
    } else {
        dist::student_t_cdf(x, nu).ln()
    }
}

/// Updates the robit latent responses in place by one slice step each on
/// the truncated t density (T = 1), or on a truncated normal with variance
/// T sigma^2 / w_i given the weights (T != 1).
#[allow(clippy::too_many_arguments)]
pub fn draw_robit_latent<R: Rng + ?Sized>(
    latent: &mut [f64],
    z: &[bool],
    eta: &[f64],
    weights: &[f64],
    sigma: f64,
    nu: f64,
    t: f64,
    slice: &SliceSampler,
    rng: &mut R,
) {
    for i in 0..latent.len() {
        let (lo, hi) = if z[i] { (0.0, f64::INFINITY) } else { (f64::NEG_INFINITY, 0.0) };
        let e = eta[i];
        let mut y0 = latent[i];
        if !(lo..=hi).contains(&y0) || y0 == 0.0 {
            y0 = if z[i] { e.abs().max(sigma) } else { -e.abs().max(sigma) };
        }
        let y = if t == 1.0 {
            slice.step(
                y0,
                |y| dist::student_t_ln_pdf((y - e) / sigma, nu),
                lo,
                hi,
                rng,
            )
        } else {
            let var = t * sigma * sigma / weights[i];
            slice.step(y0, |y| -0.5 * (y - e) * (y - e) / var, lo, hi, rng)
        };
        latent[i] = if y == 0.0 { y0 } else { y };
    }
}

/// Exact draw of a robit latent from t truncated to the sign of z, by
/// inverse CDF.
pub fn exact_robit_latent<R: Rng + ?Sized>(z: bool, eta: f64, sigma: f64, nu: f64, rng: &mut R) -> f64 {
    let c = dist::student_t_cdf(-eta / sigma, nu);
    let u: f64 = rng.random();
    let q = if z { c + u * (1.0 - c) } else { u * c };
    let q = q.clamp(1e-300, 1.0 - 1e-16);
    let y = eta + sigma * dist::student_t_inverse_cdf(q, nu);
    if z {
        y.max(1e-300)
    } else {
        y.min(-1e-300)
    }
}

/// Log importance weight logistic / robit for one draw of the linear predictor.
pub fn logistic_log_importance_weight(eta: &[f64], z: &[bool]) -> f64 {
    let sigma = logistic_robit_sigma();
    let logistic: f64 = eta
        .iter()
        .zip(z)
        .map(|(e, &zi)| dist::ln_logistic(if zi { *e } else { -*e }))
        .sum();
    logistic - robit_log_likelihood(eta, z, sigma, LOGISTIC_ROBIT_NU)
}

/// Normalises log importance weights to weights summing to one.
pub fn self_normalize(log_weights: &[f64]) -> Vec<f64> {
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        let n = log_weights.len().max(1) as f64;
        return vec![1.0 / n; log_weights.len()];
    }
    let w: Vec<f64> = log_weights.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}
