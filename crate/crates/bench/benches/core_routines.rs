use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use hdwilks::linmodel::{wilks_lambda, Dataset};
use hdwilks::oracle::{contour_mean, quad_lsd_integral, ContourSpec, LsdIntegrand};
use hdwilks::rmt::{corrections, AspectRatios};

fn bench_corrections(c: &mut Criterion) {
    let y = AspectRatios::new(0.5, 0.25).unwrap();
    c.bench_function("corrections_closed_form", |b| {
        b.iter(|| std::hint::black_box(corrections(std::hint::black_box(y))))
    });
}

fn bench_wilks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (p, n, q, q1) = (30, 200, 80, 60);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5);
    let z = DMatrix::from_fn(n, q, |_, _| rng.random::<f64>() - 0.5);
    let data = Dataset::new(x, z, q1).unwrap();
    let b1_star = DMatrix::zeros(p, q1);
    c.bench_function("wilks_lambda_30_200_80_60", |b| {
        b.iter(|| wilks_lambda(std::hint::black_box(&data), std::hint::black_box(&b1_star)).unwrap())
    });
}

fn bench_quadrature(c: &mut Criterion) {
    let y = AspectRatios::new(0.5, 0.25).unwrap();
    c.bench_function("lsd_log_moment_quadrature", |b| {
        b.iter(|| quad_lsd_integral(LsdIntegrand::LogMoment, std::hint::black_box(y)).unwrap())
    });
}

fn bench_contour_mean(c: &mut Criterion) {
    let y = AspectRatios::new(0.5, 0.25).unwrap();
    let spec = ContourSpec::mean_default();
    c.bench_function("contour_mean_default_schedule", |b| {
        b.iter(|| contour_mean(std::hint::black_box(y), &spec).unwrap())
    });
}

criterion_group!(
    benches,
    bench_corrections,
    bench_wilks,
    bench_quadrature,
    bench_contour_mean
);
criterion_main!(benches);
