//! Parallel core against a one-thread pool. Building with
//! `--no-default-features` replaces the rayon paths by plain loops; running
//! the suite both ways compares the sequential fallback as well.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use rayon::ThreadPoolBuilder;

use hartogs::boundary::{adr_scan, AdrWindow};
use hartogs::geometry::{verify_uniform, Domain};
use hartogs::numerics::integrate_t;
use hartogs::spectral::build_mode;
use hartogs::QuadratureSpec;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut out = vec![(
        "threads=1".to_string(),
        ThreadPoolBuilder::new().num_threads(1).build().unwrap(),
    )];
    if all > 1 {
        out.push((
            format!("threads={all}"),
            ThreadPoolBuilder::new().num_threads(all).build().unwrap(),
        ));
    }
    out
}

fn bench_quadrature(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrate_t");
    let spec = QuadratureSpec::new(32);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("level32", &name), |b| {
            b.iter(|| pool.install(|| integrate_t(|p| Complex64::new(p.s * p.s / (1.0 + p.r), 0.0), &spec).unwrap()))
        });
    }
    group.finish();
}

fn bench_uniform(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_uniform");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("T_2000x64", &name), |b| {
            b.iter(|| pool.install(|| verify_uniform(Domain::T, 2000, 64, 0).unwrap()))
        });
    }
    group.finish();
}

fn bench_adr(c: &mut Criterion) {
    let mut group = c.benchmark_group("adr_scan");
    group.sample_size(10);
    let spec = QuadratureSpec::new(100);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("20x3", &name), |b| {
            b.iter(|| pool.install(|| adr_scan(20, &[0.1, 0.5, 1.0], 0, &spec, AdrWindow::default()).unwrap()))
        });
    }
    group.finish();
}

fn bench_spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigenpairs");
    group.sample_size(10);
    let problem = build_mode(0, 1, 48).unwrap();
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("mode01_n48", &name), |b| {
            b.iter(|| pool.install(|| problem.eigenpairs(4).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_quadrature, bench_uniform, bench_adr, bench_spectrum);
criterion_main!(benches);
