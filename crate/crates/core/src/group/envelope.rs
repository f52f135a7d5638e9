use rand::Rng;

use super::density::golden_max;
use super::{GroupDensity, ModeResult};
use crate::dist;
use crate::error::{Error, Result};

/// Inverse-gamma density used as an envelope for f2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaDensity {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaDensity {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        dist::inv_gamma_ln_pdf(x, self.shape, self.scale)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        dist::inv_gamma(self.shape, self.scale, rng)
    }

    /// Exponent of the right tail x^-(shape + 1).
    pub fn tail_order(&self) -> f64 {
        self.shape + 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeOptions {
    pub grid_points: usize,
    /// Grid spans [xMax / span, xMax * span].
    pub span: f64,
    /// Multiplier applied to the lower bound F3.
    pub lower_safety: f64,
    /// Multiplier applied to the upper bound F4.
    pub upper_safety: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self { grid_points: 64, span: 1e4, lower_safety: 0.99, upper_safety: 1.2 }
    }
}

/// Envelope pair around the mode of f2: q3 has a lighter right tail than f2
/// (f2/q3 bounded below by F3), q4 a heavier one (f2/q4 bounded above by F4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEnvelope {
    pub x_max: f64,
    pub boundary: bool,
    pub dk: f64,
    pub q3: InvGammaDensity,
    pub q4: InvGammaDensity,
    pub ln_f3: f64,
    pub ln_f4: f64,
}

impl SwitchEnvelope {
    pub fn f3(&self) -> f64 {
        self.ln_f3.exp()
    }

    pub fn f4(&self) -> f64 {
        self.ln_f4.exp()
    }
}

pub fn build_envelope(
    f: &GroupDensity,
    mode: ModeResult,
    opts: &EnvelopeOptions,
) -> Result<SwitchEnvelope> {
    let dk = f.tail_order();
    if !(dk > 1.0) {
        return Err(Error::EnvelopeDegenerate(dk));
    }
    let x_max = mode.x_max;
    let left = f.left_rate();
    let a3 = dk - 0.5;
    let a4 = if dk > 1.5 {
        dk - 1.5
    } else if dk > 1.25 {
        dk - 1.25
    } else {
        0.5 * (dk - 1.0)
    };
    let mut b3 = x_max * (a3 + 1.0);
    let mut b4 = x_max * (a4 + 1.0);
    if left > 0.0 {
        b3 = b3.max(1.01 * left);
        b4 = b4.min(0.99 * left);
    }
    let q3 = InvGammaDensity { shape: a3, scale: b3 };
    let q4 = InvGammaDensity { shape: a4, scale: b4 };

    let n = opts.grid_points.max(3);
    let (lo, hi) = ((x_max / opts.span).ln(), (x_max * opts.span).ln());
    let step = (hi - lo) / (n - 1) as f64;
    let g3 = |u: f64| {
        let x = u.exp();
        f.ln_f(x) - q3.ln_pdf(x)
    };
    let g4 = |u: f64| {
        let x = u.exp();
        f.ln_f(x) - q4.ln_pdf(x)
    };
    let (mut min3, mut arg3) = (f64::INFINITY, 0usize);
    let (mut max4, mut arg4) = (f64::NEG_INFINITY, 0usize);
    for i in 0..n {
        let u = lo + step * i as f64;
        let (v3, v4) = (g3(u), g4(u));
        if v3 < min3 {
            min3 = v3;
            arg3 = i;
        }
        if v4 > max4 {
            max4 = v4;
            arg4 = i;
        }
    }
    let bracket = |i: usize| {
        let a = lo + step * i.saturating_sub(1) as f64;
        let b = lo + step * (i + 1).min(n - 1) as f64;
        (a, b)
    };
    let (a, b) = bracket(arg3);
    let u3 = golden_max(|u| -g3(u), a, b, 1e-9);
    min3 = min3.min(g3(u3));
    let (a, b) = bracket(arg4);
    let u4 = golden_max(g4, a, b, 1e-9);
    max4 = max4.max(g4(u4));
    if !min3.is_finite() || !max4.is_finite() {
        return Err(Error::EnvelopeDegenerate(dk));
    }
    Ok(SwitchEnvelope {
        x_max,
        boundary: mode.boundary,
        dk,
        q3,
        q4,
        ln_f3: min3 + opts.lower_safety.ln(),
        ln_f4: max4 + opts.upper_safety.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{find_mode, GroupEigen, GroupTauPrior};

    fn density() -> GroupDensity {
        let ge = GroupEigen { eigenvalues: vec![4.0, 2.0, 1.0], rotated_resid: vec![30.0, 1.0, 0.5], s2: 0.0 };
        GroupDensity::new(&ge, GroupTauPrior::InvChiSq { dof: 2.0, scale: 0.5 }, 1.0, -2.0).unwrap()
    }

    #[test]
    fn bounds_hold_on_a_fine_grid() {
        let f = density();
        let env = build_envelope(&f, find_mode(&f), &EnvelopeOptions::default()).unwrap();
        assert!(env.q3.tail_order() > env.dk && env.q4.tail_order() < env.dk);
        for i in 0..2000 {
            let x = (-12.0 + 24.0 * i as f64 / 1999.0f64).exp() * env.x_max;
            let l3 = f.ln_f(x) - env.q3.ln_pdf(x);
            let l4 = f.ln_f(x) - env.q4.ln_pdf(x);
            assert!(l3 >= env.ln_f3, "x={x}");
            assert!(l4 <= env.ln_f4, "x={x}");
        }
    }

    #[test]
    fn non_integrable_density_is_degenerate() {
        let ge = GroupEigen { eigenvalues: vec![1.0, 1.0], rotated_resid: vec![1.0, 1.0], s2: 0.0 };
        let f = GroupDensity::new(&ge, GroupTauPrior::Flat, 1.0, 0.0).unwrap();
        assert!(matches!(
            build_envelope(&f, find_mode(&f), &EnvelopeOptions::default()),
            Err(Error::EnvelopeDegenerate(_))
        ));
    }
}
