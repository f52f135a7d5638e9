//! Shared fixtures for the criterion benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use spikegibbs::harness::{fit_config, generate_scenario, FitSettings, SimScenario};
use spikegibbs::{ModelData, RunConfig, SparseChainRecord};

/// Model data and a single-chain configuration for a named simulation scenario.
pub fn scenario_problem(name: &str) -> (ModelData, RunConfig) {
    let s = SimScenario::by_name(name).expect("known scenario");
    let mut rng = ChaCha20Rng::seed_from_u64(s.seed);
    let sim = generate_scenario(&s, &mut rng).expect("scenario data");
    let fit = FitSettings { chains: 1, ..Default::default() };
    let cfg = fit_config(&s, &sim, &fit, 1, &mut rng).expect("config");
    let data = ModelData::new(&sim.x, sim.response, &cfg.groups).expect("model data");
    (data, cfg)
}

/// Sparse records with about `k` nonzero coordinates out of `p` each.
pub fn sparse_records(n: usize, p: usize, k: usize, seed: u64) -> Vec<SparseChainRecord> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (1..=n as u64)
        .map(|iter| {
            let mut coords: Vec<usize> = (0..k).map(|_| rng.random_range(0..p)).collect();
            coords.sort_unstable();
            coords.dedup();
            SparseChainRecord { iter, entries: coords.into_iter().map(|j| (j, rng.random::<f64>() - 0.5)).collect() }
        })
        .collect()
}
