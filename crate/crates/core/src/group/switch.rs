use rand::Rng;

use super::{GroupDensity, SwitchEnvelope};
use crate::slice::SliceSampler;

/// State of one group's switching chain. `x2` is the slab variance while the
/// group is active and an auxiliary q3 draw while it is inactive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchState {
    pub active: bool,
    pub x2: f64,
}

impl SwitchState {
    pub fn inactive() -> Self {
        Self { active: false, x2: 1.0 }
    }

    /// Slab variance in force: x2 when active, 0 otherwise.
    pub fn tau2(&self) -> f64 {
        if self.active {
            self.x2
        } else {
            0.0
        }
    }
}

/// Quantities produced by one switching step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchStep {
    pub was_active: bool,
    pub active: bool,
    /// Probability of staying active.
    pub a: f64,
    /// Probability of activating.
    pub d: f64,
    /// q3(x2) / f2(x2) at the refreshed x2.
    pub c: f64,
    /// Laziness drawn from the q4 envelope.
    pub hold: f64,
}

/// One step of the on/off chain for a group.
///
/// The chain targets P(on) = F2 / (1 + F2) with tau2 | on proportional to
/// f2. X2 is refreshed first (slice step on f2 in log coordinates when
/// active, fresh q3 draw when inactive), then B is flipped with Metropolis
/// probabilities scaled by (1 - hold).
pub fn switch_step<R: Rng + ?Sized>(
    state: &mut SwitchState,
    env: &SwitchEnvelope,
    f: &GroupDensity,
    slice: &SliceSampler,
    hold_scale: f64,
    rng: &mut R,
) -> SwitchStep {
    let was_active = state.active;
    if state.active {
        if !(state.x2 > 0.0) || !f.ln_f(state.x2).is_finite() {
            state.x2 = env.x_max;
        }
        let u0 = state.x2.ln();
        let u = slice.step(u0, |u| f.ln_f(u.exp()) + u, -700.0, 700.0, rng);
        state.x2 = u.exp();
    } else {
        state.x2 = env.q3.sample(rng);
    }
    let ln_c = env.q3.ln_pdf(state.x2) - f.ln_f(state.x2);
    let c = ln_c.exp();

    let x4 = env.q4.sample(rng);
    let ln_g = f.ln_f(x4) - env.q4.ln_pdf(x4) - env.ln_f4;
    let hold = (hold_scale * ln_g.exp()).clamp(0.0, 1.0);
    let hold = if hold.is_nan() { 0.0 } else { hold };

    let leave = (1.0 - hold) * ln_c.min(0.0).exp();
    let a = 1.0 - leave;
    let d = (1.0 - hold) * (-ln_c).min(0.0).exp();
    let u: f64 = rng.random();
    state.active = if was_active { u < a } else { u < d };
    SwitchStep { was_active, active: state.active, a, d, c, hold }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{build_envelope, find_mode, EnvelopeOptions, GroupEigen, GroupTauPrior};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn probabilities_are_valid() {
        let ge = GroupEigen { eigenvalues: vec![2.0, 1.0], rotated_resid: vec![6.0, 0.2], s2: 0.0 };
        let f = GroupDensity::new(&ge, GroupTauPrior::default(), 1.0, -1.0).unwrap();
        let env = build_envelope(&f, find_mode(&f), &EnvelopeOptions::default()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut s = SwitchState::inactive();
        for _ in 0..2000 {
            let st = switch_step(&mut s, &env, &f, &SliceSampler::default(), (-0.5f64).exp(), &mut rng);
            assert!((0.0..=1.0).contains(&st.a) && (0.0..=1.0).contains(&st.d));
            assert!((0.0..=1.0).contains(&st.hold));
            assert_eq!(s.tau2() > 0.0, s.active);
        }
    }
}
