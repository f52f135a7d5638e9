//! Posterior summaries from stored chains and checks of the switching-chain
//! mixing theory.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::store::{SparseChainReader, SparseChainRecord};

/// Minimum number of draws for an HPD interval.
pub const MIN_HPD_DRAWS: usize = 100;

/// Fraction of records in which at least one of `coords` is nonzero.
pub fn union_inclusion(records: &[SparseChainRecord], coords: &[usize]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let hits = records
        .iter()
        .filter(|r| r.entries.iter().any(|(j, v)| *v != 0.0 && coords.contains(j)))
        .count();
    hits as f64 / records.len() as f64
}

pub fn union_inclusion_file(path: &Path, coords: &[usize]) -> Result<f64> {
    let out = SparseChainReader::open(path)?.read_all()?;
    Ok(union_inclusion(&out.records, coords))
}

/// Shortest interval containing ceil(level * T) of the draws.
pub fn hpd_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if draws.len() < MIN_HPD_DRAWS {
        return Err(Error::TooFewDraws { got: draws.len(), need: MIN_HPD_DRAWS });
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Config(format!("HPD level {level} outside (0, 1]")));
    }
    let mut x = draws.to_vec();
    x.sort_by(f64::total_cmp);
    Ok(sorted_hpd(&x, level))
}

fn sorted_hpd(x: &[f64], level: f64) -> (f64, f64) {
    let n = x.len();
    let k = ((level * n as f64).ceil() as usize).clamp(1, n);
    let mut best = (x[0], x[k - 1]);
    for i in 1..=n - k {
        let (lo, hi) = (x[i], x[i + k - 1]);
        if hi - lo < best.1 - best.0 {
            best = (lo, hi);
        }
    }
    best
}

/// HPD intervals at increasing `levels`, widened where needed so that each
/// interval contains the previous one.
pub fn nested_hpd(draws: &[f64], levels: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    if draws.len() < MIN_HPD_DRAWS {
        return Err(Error::TooFewDraws { got: draws.len(), need: MIN_HPD_DRAWS });
    }
    let mut x = draws.to_vec();
    x.sort_by(f64::total_cmp);
    let mut out = vec![(0.0, 0.0); levels.len()];
    let mut prev: Option<(f64, f64)> = None;
    for i in order {
        if !(levels[i] > 0.0 && levels[i] <= 1.0) {
            return Err(Error::Config(format!("HPD level {} outside (0, 1]", levels[i])));
        }
        let (mut lo, mut hi) = sorted_hpd(&x, levels[i]);
        if let Some((plo, phi)) = prev {
            lo = lo.min(plo);
            hi = hi.max(phi);
        }
        out[i] = (lo, hi);
        prev = Some((lo, hi));
    }
    Ok(out)
}

pub fn median(draws: &[f64]) -> f64 {
    if draws.is_empty() {
        return f64::NAN;
    }
    let mut x = draws.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CredibilitySummary {
    pub coord: usize,
    pub mip: f64,
    pub median: f64,
    /// (level, lower, upper), nested in level.
    pub intervals: Vec<(f64, f64, f64)>,
}

pub fn credibility_summary(coord: usize, draws: &[f64], mip: f64, levels: &[f64]) -> Result<CredibilitySummary> {
    let iv = nested_hpd(draws, levels)?;
    Ok(CredibilitySummary {
        coord,
        mip,
        median: median(draws),
        intervals: levels.iter().zip(iv).map(|(l, (a, b))| (*l, a, b)).collect(),
    })
}

/// Importance-weighted average of per-iteration probabilities.
pub fn weighted_mips(records: &[SparseChainRecord], weights: &[f64], p: usize) -> Result<Vec<f64>> {
    if records.len() != weights.len() {
        return Err(Error::DimensionMismatch("records and importance weights".into()));
    }
    let total: f64 = weights.iter().sum();
    let mut acc = vec![0.0; p];
    for (r, w) in records.iter().zip(weights) {
        for &(j, v) in &r.entries {
            if j < p {
                acc[j] += w * v;
            }
        }
    }
    Ok(acc.into_iter().map(|a| a / total).collect())
}

/// Sample autocorrelations up to `max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return vec![1.0];
    }
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|k| {
            x[..n - k].iter().zip(&x[k..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>()
                / n as f64
                / c0
        })
        .collect()
}

/// Effective sample size with the initial positive sequence truncation of
/// the autocorrelation sum.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = dev.iter().map(|v| v * v).sum();
    if c0 == 0.0 {
        return n as f64;
    }
    let rho = |k: usize| dev[..n - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / c0;
    let mut sum = -1.0;
    let mut k = 0;
    let mut prev = f64::INFINITY;
    while k + 1 < n {
        let g = rho(k) + rho(k + 1);
        if g <= 0.0 {
            break;
        }
        let g = g.min(prev);
        sum += 2.0 * g;
        prev = g;
        k += 2;
    }
    n as f64 / sum.max(1.0 / n as f64)
}

/// One step of a switching chain: the state after the step and the stay /
/// activate probabilities used for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchRecord {
    pub w: bool,
    pub a: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchDiagnostics {
    pub steps: usize,
    pub on_frequency: f64,
    pub mean_a: f64,
    pub mean_d: f64,
    pub lambda2_bar: f64,
    pub t_int_w: f64,
    pub n_independent: f64,
    /// Per-step coupling frequency of a fresh paired step at every trace position.
    pub p_bar: f64,
    pub expected_coupling_time: f64,
    pub var_coupling_time: f64,
    /// Mean of the printed expression 1 - A - D - 2AD.
    pub p_bar_printed: f64,
    pub mean_coupling_time: f64,
    pub sd_coupling_time: f64,
    pub replicates: usize,
    pub ess_autocorrelation: f64,
}

/// Mixing summaries of a recorded (W, A, D) trace.
///
/// Paired chains share one uniform per step: a chain in state 1 stays with
/// probability A, one in state 0 activates with probability D. The coupling
/// frequency p-bar is estimated from one fresh paired step per trace
/// position; the coupling time is simulated separately from `replicates`
/// starts spread over the trace (wrapping at the end).
pub fn switch_theory_check<R: Rng + ?Sized>(
    trace: &[SwitchRecord],
    replicates: usize,
    rng: &mut R,
) -> Result<SwitchDiagnostics> {
    let n = trace.len();
    if n < 1000 {
        return Err(Error::TooFewDraws { got: n, need: 1000 });
    }
    let nf = n as f64;
    let mean_a = trace.iter().map(|r| r.a).sum::<f64>() / nf;
    let mean_d = trace.iter().map(|r| r.d).sum::<f64>() / nf;
    let on = trace.iter().filter(|r| r.w).count() as f64 / nf;
    let lambda2_bar = mean_a - mean_d;
    let t_int_w = (1.0 + lambda2_bar) / (1.0 - lambda2_bar);
    let p_bar_printed = trace.iter().map(|r| 1.0 - r.a - r.d - 2.0 * r.a * r.d).sum::<f64>() / nf;

    let paired_step = |r: &SwitchRecord, u: f64| (u < r.a) == (u < r.d);
    let coupled = trace.iter().filter(|r| paired_step(r, rng.random())).count();
    let p_bar = coupled as f64 / nf;

    let mut times = Vec::with_capacity(replicates);
    let stride = (n / replicates.max(1)).max(1);
    for k in 0..replicates {
        let mut t = (k * stride) % n;
        let mut steps = 0u64;
        loop {
            steps += 1;
            if paired_step(&trace[t], rng.random()) {
                break;
            }
            t = (t + 1) % n;
            if steps > 100 * n as u64 {
                break;
            }
        }
        times.push(steps as f64);
    }
    let r = times.len().max(1) as f64;
    let mean_t = times.iter().sum::<f64>() / r;
    let sd_t = (times.iter().map(|t| (t - mean_t).powi(2)).sum::<f64>() / (r - 1.0).max(1.0)).sqrt();
    let w: Vec<f64> = trace.iter().map(|r| if r.w { 1.0 } else { 0.0 }).collect();
    Ok(SwitchDiagnostics {
        steps: n,
        on_frequency: on,
        mean_a,
        mean_d,
        lambda2_bar,
        t_int_w,
        n_independent: nf / (2.0 * t_int_w),
        p_bar,
        expected_coupling_time: 1.0 / p_bar,
        var_coupling_time: (1.0 - p_bar) / (p_bar * p_bar),
        p_bar_printed,
        mean_coupling_time: mean_t,
        sd_coupling_time: sd_t,
        replicates: times.len(),
        ess_autocorrelation: effective_sample_size(&w),
    })
}

pub fn write_switch_trace(path: &Path, trace: &[SwitchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["w", "a", "d"])?;
    for r in trace {
        w.write_record([u8::from(r.w).to_string(), r.a.to_string(), r.d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_switch_trace(path: &Path) -> Result<Vec<SwitchRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Parse("switch trace needs columns w,a,d".into()))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(e.to_string()))
        };
        out.push(SwitchRecord { w: get(0)? != 0.0, a: get(1)?, d: get(2)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn hpd_examples() {
        let draws: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let (lo, hi) = hpd_interval(&draws, 0.9).unwrap();
        assert_eq!(hi - lo, 899.0);
        assert_eq!(hpd_interval(&vec![3.0; 200], 0.95).unwrap(), (3.0, 3.0));
        assert!(matches!(hpd_interval(&[1.0; 10], 0.9), Err(Error::TooFewDraws { .. })));
        let iv = nested_hpd(&draws, &[0.99, 0.5, 0.9]).unwrap();
        assert!(iv[1].0 >= iv[2].0 && iv[1].1 <= iv[2].1);
        assert!(iv[2].0 >= iv[0].0 && iv[2].1 <= iv[0].1);
    }

    #[test]
    fn union_inclusion_from_raw_draws() {
        let recs = vec![
            SparseChainRecord { iter: 1, entries: vec![(0, 1.0)] },
            SparseChainRecord { iter: 2, entries: vec![(1, 1.0)] },
            SparseChainRecord { iter: 3, entries: vec![] },
            SparseChainRecord { iter: 4, entries: vec![(0, 1.0), (1, 2.0)] },
        ];
        assert_eq!(union_inclusion(&recs, &[0, 1]), 0.75);
        assert_eq!(union_inclusion(&recs, &[0]), 0.5);
    }

    #[test]
    fn ess_of_iid_and_ar1() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let iid: Vec<f64> = (0..20_000).map(|_| crate::dist::std_normal(&mut rng)).collect();
        let e = effective_sample_size(&iid);
        assert!((e / 20_000.0 - 1.0).abs() < 0.15, "{e}");
        let phi: f64 = 0.8;
        let mut x = 0.0;
        let ar: Vec<f64> = (0..50_000)
            .map(|_| {
                x = phi * x + (1.0 - phi * phi).sqrt() * crate::dist::std_normal(&mut rng);
                x
            })
            .collect();
        let want = 50_000.0 * (1.0 - phi) / (1.0 + phi);
        let e = effective_sample_size(&ar);
        assert!((e / want - 1.0).abs() < 0.2, "{e} vs {want}");
    }

    #[test]
    fn switch_check_trivial_cases() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let ones: Vec<SwitchRecord> = (0..2000).map(|i| SwitchRecord { w: i % 2 == 0, a: 1.0, d: 1.0 }).collect();
        let s = switch_theory_check(&ones, 100, &mut rng).unwrap();
        assert_eq!(s.lambda2_bar, 0.0);
        assert_eq!(s.t_int_w, 1.0);
        assert_eq!(s.n_independent, 1000.0);
        let halves: Vec<SwitchRecord> = (0..2000).map(|_| SwitchRecord { w: true, a: 0.5, d: 0.5 }).collect();
        let s = switch_theory_check(&halves, 500, &mut rng).unwrap();
        assert_eq!(s.mean_coupling_time, 1.0);
        assert_eq!(s.p_bar, 1.0);
        assert!(switch_theory_check(&halves[..10], 5, &mut rng).is_err());
    }

    #[test]
    fn switch_trace_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let t = vec![SwitchRecord { w: true, a: 0.25, d: 0.5 }, SwitchRecord { w: false, a: 1.0, d: 0.0 }];
        write_switch_trace(&p, &t).unwrap();
        assert_eq!(read_switch_trace(&p).unwrap(), t);
    }
}
