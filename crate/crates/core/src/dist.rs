//! Log densities and samplers used by the conditional updates.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gamma draw with the given shape and rate.
pub fn gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("gamma parameters").sample(rng)
}

/// Inverse-gamma draw: scale / Gamma(shape, 1).
pub fn inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    scale / gamma(shape, 1.0, rng)
}

pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b).expect("beta parameters").sample(rng)
}

pub fn normal_ln_pdf(x: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + x * x / var)
}

pub fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Scaled inverse chi-square with `dof` degrees of freedom and scale `s2`.
pub fn inv_chi_sq_ln_pdf(x: f64, dof: f64, s2: f64) -> f64 {
    inv_gamma_ln_pdf(x, 0.5 * dof, 0.5 * dof * s2)
}

pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - statrs::function::beta::ln_beta(a, b)
}

pub fn student_t_ln_pdf(x: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

pub fn student_t_cdf(x: f64, nu: f64) -> f64 {
    StudentsT::new(0.0, 1.0, nu).expect("t parameters").cdf(x)
}

pub fn student_t_inverse_cdf(u: f64, nu: f64) -> f64 {
    StudentsT::new(0.0, 1.0, nu).expect("t parameters").inverse_cdf(u)
}

/// log(1 / (1 + exp(-x))) without overflow.
pub fn ln_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn logistic(x: f64) -> f64 {
    ln_logistic(x).exp()
}

/// ln Phi(x) for the standard normal, accurate in the far left tail.
pub fn std_normal_ln_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills ratio: Phi(x) ~ phi(x) / |x| (1 - 1/x^2 + 3/x^4)
        let x2 = x * x;
        -0.5 * x2 - 0.5 * LN_2PI - (-x).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densities_match_closed_forms() {
        assert!((normal_ln_pdf(0.0, 1.0) + 0.5 * LN_2PI).abs() < 1e-14);
        // IG(1,1) at 1: exp(-1)
        assert!((inv_gamma_ln_pdf(1.0, 1.0, 1.0) + 1.0).abs() < 1e-14);
        assert!((beta_ln_pdf(0.3, 1.0, 1.0)).abs() < 1e-14);
        // t_1 is Cauchy
        let c = student_t_ln_pdf(1.0, 1.0);
        assert!((c - (1.0 / (2.0 * std::f64::consts::PI)).ln()).abs() < 1e-12);
        assert!((student_t_cdf(0.0, 5.0) - 0.5).abs() < 1e-14);
        assert!((ln_logistic(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!(ln_logistic(-800.0).is_finite());
    }

    #[test]
    fn normal_ln_cdf_branches_agree() {
        assert!((std_normal_ln_cdf(0.0) - 0.5f64.ln()).abs() < 1e-15);
        // Phi(-1.959964) = 0.025
        assert!((std_normal_ln_cdf(-1.959_963_984_540_054) - 0.025f64.ln()).abs() < 1e-9);
        let (a, b) = (std_normal_ln_cdf(-30.0 + 1e-9), std_normal_ln_cdf(-30.0 - 1e-9));
        assert!((a - b).abs() < 1e-6, "{a} {b}");
        assert!(std_normal_ln_cdf(-1e3).is_finite());
    }
}
