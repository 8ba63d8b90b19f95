use ccfrontier_bench::{log_uniform_law, T};
use ccfrontier_core::{solve_mif, MdpConfig, RatioDist};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_mif");
    g.sample_size(10);
    let two = RatioDist::empirical(vec![(0.5, 0.5), (2.0, 0.5)]).unwrap();
    g.bench_function("two-atom/w5/g0.95", |b| {
        b.iter(|| solve_mif(black_box(&two), &MdpConfig::new(5.0, 0.95, T)).unwrap())
    });
    let lu = log_uniform_law();
    g.bench_function("log-uniform/w5/g0.9", |b| {
        b.iter(|| solve_mif(black_box(&lu), &MdpConfig::new(5.0, 0.9, T)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bench_solver);
criterion_main!(benches);
