//! Benchmarks for the three hot paths: eigendecomposition, the fiber
//! maximization, and the full sphere minimization.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nehari_bench::{free_operator, staggered_problem};
use nehari_core::solver::{minimize_sphere, SolveOptions};
use nehari_core::{InnerOptions, VertexFunction};

fn bench_eigendecompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigendecompose");
    for side in [64usize, 256] {
        let op = free_operator(side);
        group.bench_function(format!("free_ring_{side}"), |b| {
            b.iter(|| black_box(op.eigendecompose().unwrap()))
        });
    }
    group.finish();
}

fn random_direction(prob: &nehari_core::Problem, seed: u64) -> VertexFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VertexFunction::from_fn(Arc::clone(prob.torus()), |_| rng.random_range(-1.0..1.0))
}

fn bench_inner_maximize(c: &mut Criterion) {
    let mut group = c.benchmark_group("inner_maximize");
    for side in [16usize, 64] {
        let prob = staggered_problem(side);
        let w = random_direction(&prob, 11);
        let opts = InnerOptions::default();
        group.bench_function(format!("staggered_{side}"), |b| {
            b.iter(|| black_box(prob.inner_maximize(&w, &opts).unwrap()))
        });
    }
    group.finish();
}

fn bench_minimize_sphere(c: &mut Criterion) {
    let mut group = c.benchmark_group("minimize_sphere");
    group.sample_size(20);
    for side in [16usize, 32] {
        let prob = staggered_problem(side);
        let w = random_direction(&prob, 23);
        let opts = SolveOptions::default();
        group.bench_function(format!("staggered_{side}"), |b| {
            b.iter(|| black_box(minimize_sphere(&prob, &w, &opts).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_eigendecompose,
    bench_inner_maximize,
    bench_minimize_sphere
);
criterion_main!(benches);
