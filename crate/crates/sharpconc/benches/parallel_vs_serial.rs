//! Parallel vs sequential comparison for the heavy inner loops.
//!
//! Run with `cargo bench -p sharpconc`. The `*_seq` baselines are always
//! compiled; the parallel variants dispatch through rayon under the default
//! `parallel` feature (without it they fall back to the sequential path, so
//! the two groups coincide).

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sharpconc::extremal::extremal_lattice_f64;
use sharpconc::lattice::{max_k_sperner_bruteforce, max_k_sperner_bruteforce_seq, BoxShape};

fn bench_sperner_bruteforce(c: &mut Criterion) {
    let shape = BoxShape::new(vec![2, 3, 3]).unwrap(); // 2^18 subsets
    let mut group = c.benchmark_group("sperner_bruteforce_18pt");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| max_k_sperner_bruteforce(black_box(&shape), 2).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| max_k_sperner_bruteforce_seq(black_box(&shape), 2).unwrap())
    });
    group.finish();
}

fn bench_convolution_power(c: &mut Criterion) {
    let base = extremal_lattice_f64(1.0 / 3.0);
    let mut group = c.benchmark_group("float_convolution_power_n2000");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(&base).power(2000))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(&base).power_seq(2000))
    });
    group.finish();
}

criterion_group!(benches, bench_sperner_bruteforce, bench_convolution_power);
criterion_main!(benches);
