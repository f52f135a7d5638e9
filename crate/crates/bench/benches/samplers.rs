use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use spikegibbs::engine::ChainSampler;
use spikegibbs::fixed::{collapsed_log_odds, draw_inclusion};
use spikegibbs::group::{build_envelope, find_mode, switch_step, EnvelopeOptions, GroupDensity, SwitchState};
use spikegibbs::slice::SliceSampler;
use spikegibbs::store::SparseKind;
use spikegibbs::{GroupEigen, GroupTauPrior, SparseChainReader, SparseChainWriter};
use spikegibbs_bench::{scenario_problem, sparse_records};

fn sweeps(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep");
    g.sample_size(20);
    for name in ["small", "medium", "group", "logistic"] {
        let (data, cfg) = scenario_problem(name);
        let mut chain = ChainSampler::new(&data, &cfg, 1.0, 0).unwrap();
        for _ in 0..50 {
            chain.sweep(1.0, None).unwrap();
        }
        g.bench_function(name, |b| b.iter(|| chain.sweep(1.0, None).unwrap()));
    }
    g.finish();
}

fn collapsed_odds(c: &mut Criterion) {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let r: Vec<f64> = (0..1000).map(|j| (j as f64 * 0.37).sin() * 20.0).collect();
    c.bench_function("collapsed_odds_1000", |b| {
        b.iter(|| {
            let mut on = 0;
            for &rj in &r {
                let lo = collapsed_log_odds(black_box(rj), 100.0, 1.3, 1.0).unwrap();
                on += draw_inclusion(lo, 0.01, &mut rng) as usize;
            }
            on
        })
    });
}

fn envelope(c: &mut Criterion) {
    let ge = GroupEigen { eigenvalues: vec![3.0, 2.0, 1.2, 0.5], rotated_resid: vec![4.0, 2.25, 1.0, 0.09], s2: 0.0 };
    let f = GroupDensity::new(&ge, GroupTauPrior::default(), 1.0, -2.0).unwrap();
    let opts = EnvelopeOptions::default();
    c.bench_function("envelope_build", |b| b.iter(|| build_envelope(&f, find_mode(&f), &opts).unwrap()));
    let env = build_envelope(&f, find_mode(&f), &opts).unwrap();
    let slice = SliceSampler::default();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut s = SwitchState::inactive();
    c.bench_function("switch_step", |b| b.iter(|| switch_step(&mut s, &env, &f, &slice, 0.6, &mut rng)));
}

fn storage(c: &mut Criterion) {
    let p = 10_000;
    let recs = sparse_records(5_000, p, 20, 9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("beta.sgb");
    let mut g = c.benchmark_group("storage");
    g.sample_size(20);
    g.bench_function("write_5000_records", |b| {
        b.iter(|| {
            let mut w = SparseChainWriter::create(&path, SparseKind::Beta, p).unwrap();
            for r in &recs {
                w.append(r).unwrap();
            }
            w.finish().unwrap();
        })
    });
    g.bench_function("read_5000_records", |b| {
        b.iter_batched(
            || SparseChainReader::open(&path).unwrap(),
            |r| r.read_all().unwrap().records.len(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, sweeps, collapsed_odds, envelope, storage);
criterion_main!(benches);
