use biflab_core::family::{quadratic_family, skew_family};
use biflab_core::lyapunov::{sweep_grid, EstimatorConfig};
use biflab_core::motion::find_cycles;
use biflab_core::sampler::backward_walk;
use biflab_core::{CVec, GreenEvaluator, ParameterGrid, C64};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn green(c: &mut Criterion) {
    let f = skew_family();
    let ev = GreenEvaluator::new(&f, C64::new(0.0, 0.0), 0.5, 1e-9, 0).unwrap();
    let z = CVec::from_slice(&[C64::new(0.3, 0.1), C64::new(-0.2, 0.4), C64::new(1.0, 0.0)]);
    c.bench_function("green_value skew", |b| b.iter(|| ev.green_value(black_box(C64::new(0.1, 0.2)), black_box(&z)).unwrap()));
}

fn walk(c: &mut Criterion) {
    let f = quadratic_family();
    c.bench_function("backward_walk 10k quadratic", |b| b.iter(|| backward_walk(&f, black_box(C64::new(-1.0, 0.1)), None, 10_000, 100, 1).unwrap()));
}

fn sweep(c: &mut Criterion) {
    let f = quadratic_family();
    let g = ParameterGrid::new(C64::new(-0.75, 0.0), 3.0, 3.0, 64, 64).unwrap();
    let cfg = EstimatorConfig::przytycki(1e-9);
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("przytycki 64x64", |b| b.iter(|| sweep_grid(&f, black_box(&g), &cfg).unwrap()));
    group.finish();
}

fn cycles(c: &mut Criterion) {
    let f = quadratic_family();
    c.bench_function("find_cycles period 6", |b| b.iter(|| find_cycles(&f, black_box(C64::new(-1.2, 0.15)), 6).unwrap()));
}

criterion_group!(benches, green, walk, sweep, cycles);
criterion_main!(benches);
