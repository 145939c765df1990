use std::hint::black_box;

use apptsched::engine::loss_and_grad;
use apptsched::fit::fit;
use apptsched::opt::DEFAULT_TOL;
use apptsched::{loss_total, optimize, simulate_loss, Channel, EngineConfig, MomentPair, SimConfig};
use apptsched_bench::instance;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn loss(c: &mut Criterion) {
    let mut g = c.benchmark_group("loss");
    for n in [41, 1000, 2000] {
        let (p, s) = instance(n, 0.4, 1.5);
        for family in Channel::ALL {
            let cfg = EngineConfig::new(0.5, family).unwrap();
            g.bench_with_input(BenchmarkId::new(family.name(), n), &n, |b, _| {
                b.iter(|| loss_total(black_box(&p), black_box(&s), &cfg).unwrap())
            });
        }
    }
    g.finish();
}

fn gradient(c: &mut Criterion) {
    let (p, s) = instance(41, 1.0, 1.5);
    let cfg = EngineConfig::new(0.5, Channel::Ph).unwrap();
    c.bench_function("grad/ph/41", |b| b.iter(|| loss_and_grad(black_box(&p), black_box(&s), &cfg, None).unwrap()));
}

fn fits(c: &mut Criterion) {
    let m = MomentPair::new(1.3, 0.9).unwrap();
    for family in Channel::ALL {
        c.bench_function(&format!("fit/{}", family.name()), |b| b.iter(|| fit(black_box(m), family).unwrap()));
    }
}

fn optimize_small(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimize");
    g.sample_size(10);
    let (p, s) = instance(41, 0.7, 1.5);
    for family in Channel::ALL {
        let cfg = EngineConfig::new(0.5, family).unwrap();
        g.bench_function(family.name(), |b| b.iter(|| optimize(&p, &cfg, &s, DEFAULT_TOL, 20_000).unwrap()));
    }
    g.finish();
}

fn simulate(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    let (p, s) = instance(41, 0.7, 1.5);
    let cfg = SimConfig::new(10_000, 1, Channel::Ph, 0.5).unwrap();
    g.bench_function("ph/41/10k", |b| b.iter(|| simulate_loss(&p, &s, &cfg, None).unwrap()));
    g.finish();
}

criterion_group!(benches, loss, gradient, fits, optimize_small, simulate);
criterion_main!(benches);
