use criterion::{black_box, criterion_group, criterion_main, Criterion};

use levi_bench::{cosine_kernel, dense_engine};
use levi_core::frozen_kernel::{Boundary, FrozenEvaluator};
use levi_core::generator::{Extension, Generator, GridField};
use levi_core::grid::SpatialGrid;
use levi_core::parametrix::{Layout, Propagator, Which};

fn frozen(c: &mut Criterion) {
    let eval = FrozenEvaluator::new(cosine_kernel(0.3));
    let grid = SpatialGrid::new(1, 40.0, 2048).unwrap();
    c.bench_function("frozen kernel, free space, N = 2048", |b| {
        b.iter(|| eval.evaluate_frozen(black_box(&[1.0]), 1.0, &grid, Boundary::FreeSpace).unwrap())
    });
    let grid = SpatialGrid::new(1, 10.0, 256).unwrap();
    c.bench_function("frozen kernel, torus, N = 256", |b| {
        b.iter(|| eval.evaluate_frozen(black_box(&[1.0]), 1.0, &grid, Boundary::Periodic).unwrap())
    });
}

fn propagator(c: &mut Criterion) {
    let e = dense_engine(0.3, 256, 16);
    let all: Vec<usize> = (0..256).collect();
    let block = e.prop.block(Which::P0, 0.5, Layout::Rows, &all);
    e.prop.apply(Which::Phi, 0.25, Layout::Rows, &block);
    c.bench_function("dense Φ apply, cached matrix, 256 × 256", |b| {
        b.iter(|| e.prop.apply(Which::Phi, 0.25, Layout::Rows, black_box(&block)))
    });
}

fn construction(c: &mut Criterion) {
    let mut g = c.benchmark_group("construction, N = 64, M = 16");
    g.sample_size(10);
    let e = dense_engine(0.3, 64, 16);
    let all: Vec<usize> = (0..64).collect();
    g.bench_function("Volterra march", |b| b.iter(|| e.duhamel_solve(black_box(&all)).unwrap()));
    g.bench_function("series", |b| b.iter(|| e.psi_series(black_box(&[0, 16, 32])).unwrap()));
    g.finish();
}

fn generator(c: &mut Criterion) {
    let gen = Generator::new(cosine_kernel(0.3));
    let grid = SpatialGrid::new(1, 10.0, 256).unwrap();
    let vals: Vec<f64> = grid.axis().iter().map(|x| 1.0 / (1.0 + x * x)).collect();
    let f = GridField::new(&grid, &vals, Extension::Periodic).unwrap();
    let points: Vec<usize> = (0..256).step_by(16).collect();
    let mut g = c.benchmark_group("quadrature generator");
    g.sample_size(10);
    g.bench_function("16 grid points", |b| b.iter(|| gen.apply_on_grid(&f, black_box(&points)).unwrap()));
    g.finish();
}

criterion_group!(benches, frozen, propagator, construction, generator);
criterion_main!(benches);
