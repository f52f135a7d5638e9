mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use spikegibbs::engine::{ChainSampler, GroupDef, ModelData, Response, RunConfig};
use spikegibbs::group::{f2_eval, group_eigen_reduce, GroupTauPrior};
use spikegibbs::harness::ar_design;
use spikegibbs::{dist, fixed, DesignMatrix};

fn fixed_hyper_config(sigma2: f64, tau2: f64, pi: f64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.fixed.pi_a = pi;
    cfg.fixed.pi_hyper = None;
    cfg.fixed.tau_f2 = tau2;
    cfg.fixed.tau_hyper = None;
    cfg.fixed.slab_relative = false;
    cfg.sigma2.fixed = Some(sigma2);
    cfg
}

fn simulate(x: &DesignMatrix, beta: &[f64], sigma: f64, rng: &mut ChaCha20Rng) -> Vec<f64> {
    x.mul_vec(beta).iter().map(|e| e + sigma * dist::std_normal(rng)).collect()
}

#[test]
fn collapsed_probability_matches_full_likelihood_quadrature() {
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    for _ in 0..40 {
        let n = rng.random_range(2..=10);
        let x = random_design(n, 3, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| 2.0 * dist::std_normal(&mut rng)).collect();
        let others = [0.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let (sigma2, tau2, pi) = (rng.random_range(0.3..3.0), rng.random_range(0.1..5.0), rng.random_range(0.05..0.95));
        let partial: Vec<f64> = y.iter().zip(x.mul_vec(&others)).map(|(y, e)| y - e).collect();
        let xj = x.column(0);
        let r: f64 = xj.iter().zip(&partial).map(|(a, b)| a * b).sum();
        let s: f64 = xj.iter().map(|a| a * a).sum();
        let lo = fixed::collapsed_log_odds(r, s, sigma2, tau2).unwrap();
        let got = fixed::inclusion_probability(lo, pi, 1.0);

        // integrate over b with the full n-dimensional Gaussian likelihood
        let ll = |b: f64| -> f64 {
            partial.iter().zip(xj).map(|(e, a)| dist::normal_ln_pdf(e - a * b, sigma2)).sum::<f64>()
        };
        let g = |b: f64| ll(b) + dist::normal_ln_pdf(b, tau2);
        let peak = argmax(&g, -50.0, 50.0);
        let on = log_integral(g, peak - 60.0, peak + 60.0, peak, 1e-12);
        let off = ll(0.0);
        let want = 1.0 / (1.0 + ((1.0 - pi) / pi) * (off - on).exp());
        assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
    }
}

#[test]
fn eigen_reduced_f2_matches_dense_marginal() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..30 {
        let n = rng.random_range(3..=25);
        let j = rng.random_range(1..=6);
        let x = random_design(n, j, &mut rng);
        let xd = to_dense(&x);
        let r: Vec<f64> = (0..n).map(|_| dist::std_normal(&mut rng)).collect();
        let sigma2 = rng.random_range(0.5..2.0);
        let prior = GroupTauPrior::InvChiSq { dof: 2.0, scale: 0.7 };
        let ge = group_eigen_reduce(&xd, &r).unwrap();
        for tau2 in [0.01, 0.3, 1.0, 7.0, 120.0] {
            let got = f2_eval(&ge, tau2, prior, sigma2).unwrap();
            let all: Vec<usize> = (0..j).collect();
            let want = log_marginal(&xd, &r, &all, &vec![tau2; j], sigma2) - log_marginal(&xd, &r, &[], &[], sigma2)
                + prior.ln_pdf(tau2);
            assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{got} vs {want}");
        }
    }
}

#[test]
fn correlated_design_chain_matches_enumeration() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let x = ar_design(30, 5, 0.9, &mut rng);
    let y = simulate(&x, &[1.0, -1.0, 0.0, 0.5, 0.0], 1.0, &mut rng);
    let want = enumerate_mips(&to_dense(&x), &y, 1.0, 1.0, 0.3, 1.0);
    let mut cfg = fixed_hyper_config(1.0, 1.0, 0.3);
    cfg.plan.sweeps = 60_000;
    cfg.plan.burnin = 1_000;
    let data = ModelData::new(&x, Response::Continuous(y), &[]).unwrap();
    let out = spikegibbs::engine::run(&data, &cfg, None).unwrap();
    let (rb, freq) = (out.mips(), out.inclusion_freq());
    for j in 0..5 {
        assert!((rb[j] - want[j]).abs() < 0.015, "rb {j}: {} vs {}", rb[j], want[j]);
        assert!((freq[j] - want[j]).abs() < 0.02, "freq {j}: {} vs {}", freq[j], want[j]);
    }
}

#[test]
fn tempered_chain_matches_tempered_enumeration() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let x = ar_design(25, 4, 0.6, &mut rng);
    let y = simulate(&x, &[0.8, 0.0, -0.6, 0.0], 1.0, &mut rng);
    let t = 1.5;
    let want = enumerate_mips(&to_dense(&x), &y, 1.0, 1.0, 0.2, t);
    let cold = enumerate_mips(&to_dense(&x), &y, 1.0, 1.0, 0.2, 1.0);
    assert!(want.iter().zip(&cold).any(|(a, b)| (a - b).abs() > 0.05), "temperature should matter here");
    let cfg = fixed_hyper_config(1.0, 1.0, 0.2);
    let data = ModelData::new(&x, Response::Continuous(y), &[]).unwrap();
    let mut chain = ChainSampler::new(&data, &cfg, t, 0).unwrap();
    let (burn, n) = (1_000, 60_000);
    let mut acc = [0.0; 4];
    for it in 0..burn + n {
        chain.sweep(t, None).unwrap();
        if it >= burn {
            for (a, p) in acc.iter_mut().zip(chain.inclusion_probabilities()) {
                *a += p;
            }
        }
    }
    for j in 0..4 {
        let got = acc[j] / n as f64;
        assert!((got - want[j]).abs() < 0.015, "{j}: {got} vs {}", want[j]);
    }
}

#[test]
fn group_activation_frequency_matches_integrated_odds() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let (n, sigma2, pi): (usize, f64, f64) = (30, 1.0, 0.3);
    let x = random_design(n, 3, &mut rng);
    let y = simulate(&x, &[0.25, -0.2, 0.15], 1.0, &mut rng);
    let prior = GroupTauPrior::InvChiSq { dof: 3.0, scale: 0.2 };

    // F2 by quadrature of the dense marginal-likelihood ratio in log tau2
    let xd = to_dense(&x);
    let base = log_marginal(&xd, &y, &[], &[], sigma2);
    let g = |u: f64| {
        let t2 = u.exp();
        log_marginal(&xd, &y, &[0, 1, 2], &[t2; 3], sigma2) - base + prior.ln_pdf(t2) + u
    };
    let peak = argmax(&g, -20.0, 10.0);
    let f2 = (log_integral(g, -40.0, 30.0, peak, 1e-10) + pi.ln() - (-pi).ln_1p()).exp();
    let want = f2 / (1.0 + f2);
    assert!(want > 0.1 && want < 0.9, "want an uncertain group, got {want}");

    let mut cfg = fixed_hyper_config(sigma2, 1.0, 0.5);
    cfg.groups = vec![GroupDef { members: vec![0, 1, 2], zero_sum: false, pi_a: pi, tau_prior: prior }];
    cfg.plan.sweeps = 40_000;
    cfg.plan.burnin = 500;
    let data = ModelData::new(&x, Response::Continuous(y), &cfg.groups).unwrap();
    let out = spikegibbs::engine::run(&data, &cfg, None).unwrap();
    let got = out.mips()[0];
    assert!((got - want).abs() < 0.02, "{got} vs {want}");
}

#[test]
fn joint_draw_moments_match_closed_form_posterior() {
    // with pi = 1 every coordinate is active and beta | y is Gaussian
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let x = ar_design(20, 3, 0.7, &mut rng);
    let y = simulate(&x, &[1.0, 0.5, -1.0], 0.7, &mut rng);
    let (sigma2, tau2) = (0.5, 2.0);
    let xd = to_dense(&x);
    let q = xd.transpose() * &xd + DMatrix::identity(3, 3) * (sigma2 / tau2);
    let mean = q.clone().lu().solve(&(xd.transpose() * DVector::from_column_slice(&y))).unwrap();
    let cov = q.try_inverse().unwrap() * sigma2;

    let mut cfg = fixed_hyper_config(sigma2, tau2, 1.0);
    cfg.plan.sweeps = 40_000;
    cfg.plan.burnin = 100;
    cfg.plan.keep_records = true;
    let data = ModelData::new(&x, Response::Continuous(y), &[]).unwrap();
    let out = spikegibbs::engine::run(&data, &cfg, None).unwrap();
    for j in 0..3 {
        let d = out.coefficient_draws(j);
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let v = d.iter().map(|b| (b - m).powi(2)).sum::<f64>() / d.len() as f64;
        let sd = cov[(j, j)].sqrt();
        assert!((m - mean[j]).abs() < 0.03 * sd.max(1.0), "mean {j}: {m} vs {}", mean[j]);
        assert!((v / cov[(j, j)] - 1.0).abs() < 0.05, "var {j}: {v} vs {}", cov[(j, j)]);
    }
}

/// P(B = 1 | y) for a single coordinate by quadrature over its coefficient,
/// given the log-likelihood as a function of the coefficient.
fn single_coordinate_mip<F: Fn(f64) -> f64>(ll: F, tau2: f64, pi: f64) -> f64 {
    let g = |b: f64| ll(b) + dist::normal_ln_pdf(b, tau2);
    let peak = argmax(&g, -20.0, 20.0);
    let on = log_integral(g, -40.0, 40.0, peak, 1e-10);
    1.0 / (1.0 + ((1.0 - pi) / pi) * (ll(0.0) - on).exp())
}

#[test]
fn t_noise_chain_matches_quadrature() {
    let mut rng = ChaCha20Rng::seed_from_u64(41);
    let (n, nu, sigma2, tau2, pi) = (20, 3.0, 1.0, 1.0, 0.4);
    let x = random_design(n, 1, &mut rng);
    let y: Vec<f64> = x.column(0).iter().map(|a| 0.45 * a + dist::std_normal(&mut rng)).collect();
    let xs = x.column(0).to_vec();
    let ll = |b: f64| {
        let r: Vec<f64> = y.iter().zip(&xs).map(|(y, a)| y - a * b).collect();
        spikegibbs::noise::t_log_likelihood(&r, sigma2, nu)
    };
    let want = single_coordinate_mip(ll, tau2, pi);
    assert!(want > 0.1 && want < 0.9, "{want}");
    let mut cfg = fixed_hyper_config(sigma2, tau2, pi);
    cfg.noise = spikegibbs::NoiseKind::StudentT { nu };
    cfg.plan.sweeps = 60_000;
    let data = ModelData::new(&x, Response::Continuous(y.clone()), &[]).unwrap();
    let got = spikegibbs::engine::run(&data, &cfg, None).unwrap().inclusion_freq()[0];
    assert!((got - want).abs() < 0.02, "{got} vs {want}");
}

#[test]
fn robit_chain_matches_quadrature() {
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let (n, tau2, pi) = (30, 1.0, 0.4);
    let x = random_design(n, 1, &mut rng);
    let z: Vec<bool> = x.column(0).iter().map(|a| 0.6 * a + 1.5 * dist::std_normal(&mut rng) > 0.0).collect();
    let xs = x.column(0).to_vec();
    let noise = spikegibbs::NoiseKind::Robit { nu: 5.0 };
    let sigma = noise.fixed_sigma().unwrap();
    let ll = |b: f64| {
        let eta: Vec<f64> = xs.iter().map(|a| a * b).collect();
        spikegibbs::noise::robit_log_likelihood(&eta, &z, sigma, 5.0)
    };
    let want = single_coordinate_mip(ll, tau2, pi);
    assert!(want > 0.1 && want < 0.9, "{want}");
    let mut cfg = fixed_hyper_config(1.0, tau2, pi);
    cfg.sigma2.fixed = None;
    cfg.noise = noise;
    cfg.plan.sweeps = 60_000;
    let data = ModelData::new(&x, Response::Binary(z.clone()), &[]).unwrap();
    let got = spikegibbs::engine::run(&data, &cfg, None).unwrap().inclusion_freq()[0];
    assert!((got - want).abs() < 0.02, "{got} vs {want}");
}

/// Single-coordinate chain at temperature `t`, returning the inclusion frequency.
fn tempered_frequency(data: &ModelData, cfg: &RunConfig, t: f64, sweeps: usize) -> f64 {
    let mut chain = ChainSampler::new(data, cfg, t, 3).unwrap();
    let mut on = 0usize;
    for it in 0..sweeps + 500 {
        chain.sweep(t, None).unwrap();
        if it >= 500 && !chain.beta_original().is_empty() {
            on += 1;
        }
    }
    on as f64 / sweeps as f64
}

#[test]
fn tempered_t_and_robit_chains_match_quadrature() {
    let t = 1.6;
    let mut rng = ChaCha20Rng::seed_from_u64(43);
    let (tau2, pi): (f64, f64) = (1.0, 0.4);
    let tempered_pi = |mip_odds: f64| mip_odds / (1.0 + mip_odds);
    let x = random_design(25, 1, &mut rng);
    let xs = x.column(0).to_vec();

    // t noise with fixed sigma2
    let y: Vec<f64> = xs.iter().map(|a| 0.5 * a + dist::std_normal(&mut rng)).collect();
    let ll = |b: f64| {
        let r: Vec<f64> = y.iter().zip(&xs).map(|(y, a)| y - a * b).collect();
        spikegibbs::noise::tempered_t_log_likelihood(&r, 1.0, 4.0, t)
    };
    let g = |b: f64| ll(b) + dist::normal_ln_pdf(b, tau2);
    let on = log_integral(g, -40.0, 40.0, argmax(&g, -20.0, 20.0), 1e-10);
    let want = tempered_pi(((pi.ln() - (-pi).ln_1p()) / t + on - ll(0.0)).exp());
    let mut cfg = fixed_hyper_config(1.0, tau2, pi);
    cfg.noise = spikegibbs::NoiseKind::StudentT { nu: 4.0 };
    let data = ModelData::new(&x, Response::Continuous(y.clone()), &[]).unwrap();
    let got = tempered_frequency(&data, &cfg, t, 60_000);
    assert!((got - want).abs() < 0.02, "t noise: {got} vs {want}");

    // robit
    let z: Vec<bool> = xs.iter().map(|a| 0.7 * a + dist::std_normal(&mut rng) > 0.0).collect();
    let ll = |b: f64| {
        let eta: Vec<f64> = xs.iter().map(|a| a * b).collect();
        spikegibbs::noise::tempered_robit_log_likelihood(&eta, &z, 1.0, 5.0, t)
    };
    let g = |b: f64| ll(b) + dist::normal_ln_pdf(b, tau2);
    let on = log_integral(g, -40.0, 40.0, argmax(&g, -20.0, 20.0), 1e-10);
    let want = tempered_pi(((pi.ln() - (-pi).ln_1p()) / t + on - ll(0.0)).exp());
    let mut cfg = fixed_hyper_config(1.0, tau2, pi);
    cfg.sigma2.fixed = None;
    cfg.noise = spikegibbs::NoiseKind::Robit { nu: 5.0 };
    let data = ModelData::new(&x, Response::Binary(z.clone()), &[]).unwrap();
    let got = tempered_frequency(&data, &cfg, t, 60_000);
    assert!((got - want).abs() < 0.02, "robit: {got} vs {want}");
}

#[test]
fn hyperparameter_chain_matches_integrated_enumeration() {
    // pi ~ Beta(a, b) and sigma2 ~ scaled inverse chi-square with a
    // sigma2-relative slab integrate out in closed form:
    // p(y | S) ~ |C|^-1/2 (dof scale + y' C^-1 y)^-(n + dof)/2, C = I + tau X_S X_S'
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let (n, p) = (30, 5);
    let x = ar_design(n, p, 0.7, &mut rng);
    let y = simulate(&x, &[1.0, 0.0, -0.6, 0.4, 0.0], 1.0, &mut rng);
    let (a, b, tau, dof, scale) = (1.0, 5.0, 1.0, 2.0, 0.5);
    let xd = to_dense(&x);
    let yv = DVector::from_column_slice(&y);
    let ln_beta = |a: f64, b: f64| {
        use statrs::function::gamma::ln_gamma;
        ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
    };
    let mut logw = Vec::new();
    for m in 0..(1usize << p) {
        let mut c = DMatrix::<f64>::identity(n, n);
        for j in (0..p).filter(|j| m >> j & 1 == 1) {
            c += xd.column(j) * xd.column(j).transpose() * tau;
        }
        let k = m.count_ones() as f64;
        let ch = c.cholesky().unwrap();
        let logdet = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let q = yv.dot(&ch.solve(&yv));
        logw.push(-0.5 * logdet - 0.5 * (n as f64 + dof) * (dof * scale + q).ln() + ln_beta(a + k, b + p as f64 - k));
    }
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let want: Vec<f64> =
        (0..p).map(|j| (0..w.len()).filter(|m| m >> j & 1 == 1).map(|m| w[m]).sum::<f64>() / z).collect();
    assert!(want.iter().any(|v| *v > 0.1 && *v < 0.9), "{want:?}");

    let mut cfg = RunConfig::default();
    cfg.fixed.pi_a = a / (a + b);
    cfg.fixed.pi_hyper = Some(spikegibbs::engine::BetaHyper { a, b });
    cfg.fixed.tau_f2 = tau;
    cfg.fixed.tau_hyper = None;
    cfg.fixed.slab_relative = true;
    cfg.sigma2.dof = dof;
    cfg.sigma2.scale = scale;
    cfg.plan.sweeps = 80_000;
    cfg.plan.burnin = 1_000;
    let data = ModelData::new(&x, Response::Continuous(y), &[]).unwrap();
    let freq = spikegibbs::engine::run(&data, &cfg, None).unwrap().inclusion_freq();
    for j in 0..p {
        assert!((freq[j] - want[j]).abs() < 0.02, "{j}: {freq:?} vs {want:?}");
    }
}

#[test]
fn slab_hyperprior_chain_matches_integrated_enumeration() {
    // as above with tau_f2 ~ IG(shape, scale) integrated by quadrature in log tau
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let (n, p) = (30, 4);
    let x = ar_design(n, p, 0.5, &mut rng);
    let y = simulate(&x, &[0.9, 0.0, -0.5, 0.0], 1.0, &mut rng);
    let (a, b, dof, scale, shape, ig_scale): (f64, f64, f64, f64, f64, f64) = (1.0, 4.0, 2.0, 0.5, 1.0, 1.0);
    let xd = to_dense(&x);
    let yv = DVector::from_column_slice(&y);
    use statrs::function::gamma::ln_gamma;
    let ln_beta = |a: f64, b: f64| ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let mut logw = Vec::new();
    for m in 0..(1usize << p) {
        let support: Vec<usize> = (0..p).filter(|j| m >> j & 1 == 1).collect();
        let k = support.len() as f64;
        let ll = |tau: f64| {
            let mut c = DMatrix::<f64>::identity(n, n);
            for &j in &support {
                c += xd.column(j) * xd.column(j).transpose() * tau;
            }
            let ch = c.cholesky().unwrap();
            let logdet = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            -0.5 * logdet - 0.5 * (n as f64 + dof) * (dof * scale + yv.dot(&ch.solve(&yv))).ln()
        };
        let lm = if support.is_empty() {
            ll(1.0)
        } else {
            let g = |u: f64| {
                let tau = u.exp();
                ll(tau) + shape * ig_scale.ln() - ln_gamma(shape) - (shape + 1.0) * u - ig_scale / tau + u
            };
            let peak = argmax(&g, -15.0, 15.0);
            log_integral(g, -30.0, 30.0, peak, 1e-9)
        };
        logw.push(lm + ln_beta(a + k, b + p as f64 - k));
    }
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let want: Vec<f64> =
        (0..p).map(|j| (0..w.len()).filter(|m| m >> j & 1 == 1).map(|m| w[m]).sum::<f64>() / z).collect();
    assert!(want.iter().any(|v| *v > 0.1 && *v < 0.9), "{want:?}");

    let mut cfg = RunConfig::default();
    cfg.fixed.pi_a = a / (a + b);
    cfg.fixed.pi_hyper = Some(spikegibbs::engine::BetaHyper { a, b });
    cfg.fixed.tau_hyper = Some(spikegibbs::engine::InvGammaHyper { shape, scale: ig_scale });
    cfg.fixed.slab_relative = true;
    cfg.sigma2.dof = dof;
    cfg.sigma2.scale = scale;
    cfg.plan.sweeps = 80_000;
    cfg.plan.burnin = 1_000;
    let data = ModelData::new(&x, Response::Continuous(y), &[]).unwrap();
    let freq = spikegibbs::engine::run(&data, &cfg, None).unwrap().inclusion_freq();
    for j in 0..p {
        assert!((freq[j] - want[j]).abs() < 0.02, "{j}: {freq:?} vs {want:?}");
    }
}
