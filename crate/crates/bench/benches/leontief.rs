use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eeio_bench::random_economy;
use eeio_core::{footprint, solve::LeontiefSolver, DemandScope};
use std::hint::black_box;

fn factorization(c: &mut Criterion) {
    let mut group = c.benchmark_group("factor");
    for n in [50, 200, 500] {
        let model = random_economy(1, n, 0.6, 4, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &model, |b, m| {
            b.iter(|| LeontiefSolver::new(black_box(m.technology())).unwrap())
        });
    }
    group.finish();
}

fn footprints(c: &mut Criterion) {
    let mut group = c.benchmark_group("footprint");
    for n in [50, 200, 500] {
        let model = random_economy(2, n, 0.6, 20, 14);
        group.bench_with_input(BenchmarkId::from_parameter(n), &model, |b, m| {
            b.iter(|| footprint(black_box(m), &DemandScope::All).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, factorization, footprints);
criterion_main!(benches);
