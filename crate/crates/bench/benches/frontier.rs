use ccfrontier_bench::{uniform_law, T};
use ccfrontier_core::{fit_smf, mif_frontier, smf_frontier, RatioDist};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_frontier(c: &mut Criterion) {
    let u = uniform_law();
    c.bench_function("mif_frontier/uniform/512", |b| {
        b.iter(|| mif_frontier(black_box(&u), T, 512).unwrap())
    });

    let samples: Vec<f64> = (0..10_000).map(|i| 0.3 + 1.7 * (i as f64 + 0.5) / 10_000.0).collect();
    let emp = RatioDist::fit_from_samples(&samples).unwrap();
    c.bench_function("mif_frontier/empirical-10k/512", |b| {
        b.iter(|| mif_frontier(black_box(&emp), T, 512).unwrap())
    });

    let trace = ccfrontier_bench::mif_trace(20_000, 7);
    let smf = fit_smf(&trace, 8, 50).unwrap();
    c.bench_function("smf_frontier/8-states/256", |b| {
        b.iter(|| smf_frontier(black_box(&smf), T, 256).unwrap())
    });
}

criterion_group!(benches, bench_frontier);
criterion_main!(benches);
