use serde::{Deserialize, Serialize};

use super::GroupEigen;
use crate::dist;
use crate::error::{Error, Result};

/// Prior on a group's slab variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupTauPrior {
    /// Improper flat prior; needs at least three informative directions.
    Flat,
    /// Scaled inverse chi-square with `dof` degrees of freedom and `scale`.
    InvChiSq { dof: f64, scale: f64 },
}

impl Default for GroupTauPrior {
    fn default() -> Self {
        GroupTauPrior::InvChiSq { dof: 2.0, scale: 1.0 }
    }
}

impl GroupTauPrior {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            GroupTauPrior::Flat => 0.0,
            GroupTauPrior::InvChiSq { dof, scale } => dist::inv_chi_sq_ln_pdf(x, dof, scale),
        }
    }

    fn d_ln_pdf(&self, x: f64) -> f64 {
        match *self {
            GroupTauPrior::Flat => 0.0,
            GroupTauPrior::InvChiSq { dof, scale } => {
                -(0.5 * dof + 1.0) / x + 0.5 * dof * scale / (x * x)
            }
        }
    }

    /// Exponent e in the right tail x^-e of the prior density.
    pub fn tail_order(&self) -> f64 {
        match *self {
            GroupTauPrior::Flat => 0.0,
            GroupTauPrior::InvChiSq { dof, .. } => 0.5 * dof + 1.0,
        }
    }

    /// Rate c in the left tail exp(-c/x) of the prior density.
    pub fn left_rate(&self) -> f64 {
        match *self {
            GroupTauPrior::Flat => 0.0,
            GroupTauPrior::InvChiSq { dof, scale } => 0.5 * dof * scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GroupTauPrior::Flat => Ok(()),
            GroupTauPrior::InvChiSq { dof, scale } if dof > 0.0 && scale > 0.0 => Ok(()),
            _ => Err(Error::Config("group prior needs positive dof and scale".into())),
        }
    }
}

/// Unnormalised density of the slab variance of an active group, with the
/// group coefficients integrated out and the prior odds folded in. Its
/// integral is the on/off odds F2. Tempered chains pass the noise variance
/// T sigma2 and prior odds divided by T.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDensity {
    d: Vec<f64>,
    r: Vec<f64>,
    prior: GroupTauPrior,
    constant: f64,
}

impl GroupDensity {
    pub fn new(ge: &GroupEigen, prior: GroupTauPrior, sigma2: f64, log_prior_odds: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::NonFiniteInput("sigma2"));
        }
        if ge.eigenvalues.len() != ge.rotated_resid.len() {
            return Err(Error::DimensionMismatch("group eigen data".into()));
        }
        if ge.eigenvalues.iter().chain(&ge.rotated_resid).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFiniteInput("group eigen data"));
        }
        let d = ge.eigenvalues.iter().map(|v| v / sigma2).collect();
        let r = ge.rotated_resid.iter().map(|v| v / (sigma2 * sigma2)).collect();
        Ok(Self { d, r, prior, constant: log_prior_odds })
    }

    /// Shifts the log density by `c` (used to calibrate F2 in tests and tools).
    pub fn with_log_offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn ln_f(&self, x: f64) -> f64 {
        if !(x > 0.0) || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let (mut logdet, mut quad) = (0.0, 0.0);
        for (d, r) in self.d.iter().zip(&self.r) {
            logdet += (d * x).ln_1p();
            quad += r * x / (d * x + 1.0);
        }
        self.constant + self.prior.ln_pdf(x) - 0.5 * logdet + 0.5 * quad
    }

    /// Derivative of `ln_f` with respect to x.
    pub fn d_ln_f(&self, x: f64) -> f64 {
        let mut acc = self.prior.d_ln_pdf(x);
        for (d, r) in self.d.iter().zip(&self.r) {
            let u = d * x + 1.0;
            acc += -0.5 * d / u + 0.5 * r / (u * u);
        }
        acc
    }

    /// Exponent of the right tail x^-dK.
    pub fn tail_order(&self) -> f64 {
        let m = self.d.iter().filter(|&&d| d > 0.0).count() as f64;
        0.5 * m + self.prior.tail_order()
    }

    /// Rate of the left tail exp(-c/x).
    pub fn left_rate(&self) -> f64 {
        self.prior.left_rate()
    }
}

/// log f2 at `tau2` for unit prior odds.
pub fn f2_eval(ge: &GroupEigen, tau2: f64, prior: GroupTauPrior, sigma2: f64) -> Result<f64> {
    if !(tau2.is_finite() && tau2 > 0.0) {
        return Err(Error::NonFiniteInput("tau2"));
    }
    Ok(GroupDensity::new(ge, prior, sigma2, 0.0)?.ln_f(tau2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeResult {
    pub x_max: f64,
    /// True when the maximum sits at an end of the search range.
    pub boundary: bool,
}

pub const MODE_LOWER: f64 = 1e-8;
pub const MODE_UPPER: f64 = 1e8;
const MODE_GRID: usize = 161;

/// Global maximiser of f2 over [1e-8, 1e8]: a log-spaced scan followed by
/// bisection on the derivative (golden section if the sign test fails).
pub fn find_mode(f: &GroupDensity) -> ModeResult {
    let (lo, hi) = (MODE_LOWER.ln(), MODE_UPPER.ln());
    let step = (hi - lo) / (MODE_GRID - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..MODE_GRID {
        let v = f.ln_f((lo + step * i as f64).exp());
        if v > best.1 {
            best = (i, v);
        }
    }
    let i = best.0;
    if i == 0 {
        return ModeResult { x_max: MODE_LOWER, boundary: true };
    }
    if i == MODE_GRID - 1 {
        return ModeResult { x_max: MODE_UPPER, boundary: true };
    }
    let mut a = (lo + step * (i - 1) as f64).exp();
    let mut b = (lo + step * (i + 1) as f64).exp();
    if f.d_ln_f(a) > 0.0 && f.d_ln_f(b) < 0.0 {
        for _ in 0..200 {
            let m = (a * b).sqrt();
            if f.d_ln_f(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
            if b / a - 1.0 < 1e-14 {
                break;
            }
        }
        let x = (a * b).sqrt();
        return ModeResult { x_max: x, boundary: false };
    }
    let u = golden_max(|u| f.ln_f(u.exp()), a.ln(), b.ln(), 1e-12);
    ModeResult { x_max: u.exp(), boundary: false }
}

pub(crate) fn golden_max<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while (b - a).abs() > tol {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    0.5 * (a + b)
}
