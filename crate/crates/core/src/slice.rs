//! Univariate slice sampling with interval doubling and the matching
//! acceptance check, so the update leaves the target exactly invariant.

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSampler {
    pub width: f64,
    pub max_doublings: usize,
}

impl Default for SliceSampler {
    fn default() -> Self {
        Self { width: 1.0, max_doublings: 50 }
    }
}

impl SliceSampler {
    pub fn new(width: f64, max_doublings: usize) -> Self {
        Self { width, max_doublings }
    }

    /// One slice update from `x0` for the unnormalised log density `log_f`,
    /// restricted to `[lower, upper]`. `log_f(x0)` must be finite.
    pub fn step<F, R>(&self, x0: f64, log_f: F, lower: f64, upper: f64, rng: &mut R) -> f64
    where
        F: Fn(f64) -> f64,
        R: Rng + ?Sized,
    {
        let f = |x: f64| {
            if x < lower || x > upper {
                f64::NEG_INFINITY
            } else {
                log_f(x)
            }
        };
        let fx0 = f(x0);
        debug_assert!(fx0.is_finite(), "slice start outside support");
        let y = fx0 - rand_distr::Distribution::<f64>::sample(&rand_distr::Exp1, rng);
        let w = self.width;
        let mut l = x0 - w * rng.random::<f64>();
        let mut r = l + w;
        let mut fl = f(l);
        let mut fr = f(r);
        let mut k = self.max_doublings;
        while k > 0 && (y < fl || y < fr) {
            if rng.random::<f64>() < 0.5 {
                l -= r - l;
                fl = f(l);
            } else {
                r += r - l;
                fr = f(r);
            }
            k -= 1;
        }
        let (l0, r0) = (l, r);
        loop {
            let x1 = l + rng.random::<f64>() * (r - l);
            if y < f(x1) && self.accept(x0, x1, y, l0, r0, &f) {
                return x1;
            }
            if x1 < x0 {
                l = x1;
            } else {
                r = x1;
            }
            if r - l <= f64::EPSILON * (1.0 + x0.abs()) {
                return x0;
            }
        }
    }

    fn accept<F: Fn(f64) -> f64>(&self, x0: f64, x1: f64, y: f64, l0: f64, r0: f64, f: &F) -> bool {
        let (mut l, mut r) = (l0, r0);
        let mut differ = false;
        while r - l > 1.1 * self.width {
            let m = 0.5 * (l + r);
            if (x0 < m) != (x1 < m) {
                differ = true;
            }
            if x1 < m {
                r = m;
            } else {
                l = m;
            }
            if differ && y >= f(l) && y >= f(r) {
                return false;
            }
        }
        true
    }
}
