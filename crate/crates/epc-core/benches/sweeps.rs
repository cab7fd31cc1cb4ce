use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use epc_core::sweeps::{exponent_identities, root_shift_batch, valuation_agreement, Driver};
use epc_core::PrimeBase;

fn drivers() -> Vec<(&'static str, Driver)> {
    let mut out = vec![("sequential", Driver::Sequential)];
    #[cfg(feature = "parallel")]
    out.push(("parallel", Driver::Parallel));
    out
}

fn bench_valuation_grid(c: &mut Criterion) {
    let primes: Vec<PrimeBase> =
        [2u64, 3, 5].iter().map(|&p| PrimeBase::new(p).unwrap()).collect();
    let mut group = c.benchmark_group("valuation-agreement-300");
    for (name, driver) in drivers() {
        group.bench_function(name, |b| {
            b.iter(|| black_box(valuation_agreement(black_box(300), &primes, driver)))
        });
    }
    group.finish();
}

fn bench_exponent_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("exponent-identities-64");
    for (name, driver) in drivers() {
        group.bench_function(name, |b| {
            b.iter(|| black_box(exponent_identities(black_box(64), driver)))
        });
    }
    group.finish();
}

fn bench_root_shift_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("root-shift-batch-32");
    group.sample_size(20);
    for (name, driver) in drivers() {
        group.bench_function(name, |b| {
            b.iter(|| black_box(root_shift_batch(black_box(1234), 32, driver)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_valuation_grid, bench_exponent_grid, bench_root_shift_batch);
criterion_main!(benches);
