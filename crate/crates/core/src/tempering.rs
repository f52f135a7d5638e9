//! Equi-energy moves between tempered replicas: an energy-ring lookup in the
//! sorted energies of the next-hotter temperature and the Metropolis
//! acceptance of the jump.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{EnergyEntry, EnergyIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemperatureLadder {
    /// Temperatures from hottest to coldest; the last must be 1.
    pub temperatures: Vec<f64>,
    /// Sweeps between merge attempts.
    pub merge_period: u64,
    /// A sweep at the next-lower temperature is run every `anneal_period`
    /// sweeps on chains hotter than 1 (0 disables).
    pub anneal_period: u64,
    /// Initial half-width of the energy ring.
    pub epsilon: f64,
}

impl Default for TemperatureLadder {
    fn default() -> Self {
        Self { temperatures: vec![1.0], merge_period: 10, anneal_period: 0, epsilon: 0.5 }
    }
}

impl TemperatureLadder {
    pub fn validate(&self) -> Result<()> {
        if self.temperatures.is_empty() {
            return Err(Error::Config("temperature ladder is empty".into()));
        }
        if self.temperatures.iter().any(|t| !(t.is_finite() && *t >= 1.0)) {
            return Err(Error::Config("temperatures must be finite and >= 1".into()));
        }
        if self.temperatures.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Config("temperatures must be strictly decreasing".into()));
        }
        if *self.temperatures.last().unwrap() != 1.0 {
            return Err(Error::Config("the last temperature must be 1".into()));
        }
        if self.temperatures.len() > 1 && self.merge_period == 0 {
            return Err(Error::Config("merge period must be positive".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Current ring half-width: doubles after each empty window up to 64 eps0
/// and resets once a window is non-empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonState {
    pub eps0: f64,
    pub current: f64,
}

impl EpsilonState {
    pub fn new(eps0: f64) -> Self {
        Self { eps0, current: eps0 }
    }
}

/// Picks a uniformly random stored state whose energy lies within the
/// current ring around `current_log_p`.
pub fn propose_merge<R: Rng + ?Sized>(
    current_log_p: f64,
    index: &EnergyIndex,
    eps: &mut EpsilonState,
    rng: &mut R,
) -> Option<EnergyEntry> {
    let window = index.window(current_log_p, eps.current);
    if window.is_empty() {
        eps.current = (2.0 * eps.current).min(64.0 * eps.eps0);
        return None;
    }
    eps.current = eps.eps0;
    Some(window[rng.random_range(0..window.len())])
}

/// Accepts with probability min(1, exp(candidate - current)).
pub fn accept_merge<R: Rng + ?Sized>(candidate: f64, current: f64, rng: &mut R) -> bool {
    if candidate.is_nan() || candidate == f64::NEG_INFINITY {
        return false;
    }
    if candidate >= current {
        return true;
    }
    (candidate - current).exp() >= rng.random::<f64>()
}

/// Log acceptance terms for a jump into a chain at temperature T from a
/// state stored at the source temperature T'. Each argument holds the
/// tempered log-likelihoods (at T, at T') of one state; the priors cancel.
pub fn equi_energy_terms(candidate: (f64, f64), current: (f64, f64)) -> (f64, f64) {
    (candidate.0 - candidate.1, current.0 - current.1)
}
