//! Dense sampling should grow with `log2 d`; implicit sampling with `n`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sqlab::instances::{haar_unit_vector, Field};
use sqlab::seed::rng_for;
use sqlab::{ImplicitKind, ImplicitVector, SqHandle};

fn dense_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample/dense");
    for n in [8u32, 12, 16, 20] {
        let mut rng = rng_for(1, &[n as u64]);
        let v = haar_unit_vector(1 << n, Field::Complex, &mut rng).unwrap().vector;
        let h = SqHandle::build_dense(v).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| {
            b.iter(|| black_box(h.sample(&mut rng).unwrap()))
        });
    }
    group.finish();
}

fn implicit_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample/implicit");
    for n in [8u32, 16, 32, 63] {
        let mut rng = rng_for(2, &[n as u64]);
        let spec = ImplicitVector::new(ImplicitKind::MinusAt(1), n, ImplicitVector::unit_scale(n)).unwrap();
        let h = SqHandle::build_implicit(spec).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| {
            b.iter(|| black_box(h.sample(&mut rng).unwrap()))
        });
    }
    group.finish();
}

fn query(c: &mut Criterion) {
    let spec = ImplicitVector::new(ImplicitKind::SignPattern(0b1011), 40, 1.0).unwrap();
    let h = SqHandle::build_implicit(spec).unwrap();
    c.bench_function("query/implicit-40", |b| b.iter(|| black_box(h.query(black_box(12345)).unwrap())));
}

/// Building SQ access from raw data is linear in `d`; the oracle counters do
/// not see it.
fn construction(c: &mut Criterion) {
    let mut group = c.benchmark_group("build/dense");
    group.sample_size(20);
    for n in [12u32, 16, 20] {
        let mut rng = rng_for(3, &[n as u64]);
        let v = haar_unit_vector(1 << n, Field::Complex, &mut rng).unwrap().vector;
        group.bench_with_input(BenchmarkId::from_parameter(n), &v, |b, v| {
            b.iter(|| black_box(SqHandle::build_dense(v.clone()).unwrap().len()))
        });
    }
    group.finish();
}

criterion_group!(benches, dense_sampling, implicit_sampling, query, construction);
criterion_main!(benches);
