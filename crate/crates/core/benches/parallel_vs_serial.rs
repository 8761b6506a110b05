//! Criterion benches comparing the rayon path against the sequential
//! fallback on the crate's data-parallel hot spots: dense products, sparse
//! solves over parameter batches, and the batched reduced-head passes.
//!
//! Both paths produce bitwise-identical results; only wall time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rbnet::exec::Exec;
use rbnet::fem::{discretize, Problem};
use rbnet::neural::{LatentMode, NetworkModel, RbOutputLayer};
use rbnet::numerics::DenseMatrix;
use rbnet::pipeline::{generate_snapshots, sample_parameters};
use rbnet::rng::SplitMix64;
use rbnet::rom::{AffineOperatorSet, CoeffScaler, Provenance};

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn bench_gemm(c: &mut Criterion) {
    let mut rng = SplitMix64::new(1);
    let a = DenseMatrix::from_fn(256, 256, |_, _| rng.uniform(-1.0, 1.0));
    let b = DenseMatrix::from_fn(256, 64, |_, _| rng.uniform(-1.0, 1.0));
    let mut group = c.benchmark_group("gemm_256x256x64");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| a.matmul_exec(&b, exec).unwrap());
        });
    }
    group.finish();
}

fn bench_svd(c: &mut Criterion) {
    let mut rng = SplitMix64::new(2);
    let m = DenseMatrix::from_fn(2000, 60, |_, _| rng.uniform(-1.0, 1.0));
    let mut group = c.benchmark_group("svd_2000x60");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| rbnet::numerics::svd_exec(&m, exec).unwrap());
        });
    }
    group.finish();
}

fn bench_snapshot_batch(c: &mut Criterion) {
    let problem = Problem::nonaffine_diffusion();
    let disc = discretize(30, 30).unwrap();
    let mus = sample_parameters(&problem.param_box, 8, &mut SplitMix64::new(3));
    let mut group = c.benchmark_group("snapshots_8_solves_30x30");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| generate_snapshots(&problem, &disc, &mus, 1e-10, exec).unwrap());
        });
    }
    group.finish();
}

fn reduced_head_model() -> (NetworkModel, DenseMatrix) {
    let mut rng = SplitMix64::new(4);
    let n = 20;
    let mats: Vec<DenseMatrix> = (0..5)
        .map(|_| {
            DenseMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    3.0 + rng.uniform(0.0, 1.0)
                } else {
                    0.2 * rng.uniform(-1.0, 1.0)
                }
            })
        })
        .collect();
    let vecs: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let bounds: Vec<(f64, f64)> = (0..8).map(|_| (0.5, 1.5)).collect();
    let ops = AffineOperatorSet::new(
        mats,
        vecs,
        CoeffScaler::from_bounds(&bounds).unwrap(),
        Provenance::DeimApproximated,
    )
    .unwrap();
    let pv = DenseMatrix::from_fn(30, n, |_, _| rng.uniform(-1.0, 1.0));
    let rb = RbOutputLayer::new(ops, pv, LatentMode::AffineCoeffs).unwrap();
    let model = NetworkModel::new_rb(16, &[64, 64], rb, &mut rng).unwrap();
    let x = DenseMatrix::from_fn(64, 16, |_, _| rng.uniform(-1.0, 1.0));
    (model, x)
}

fn bench_reduced_head_batch(c: &mut Criterion) {
    let (model, x) = reduced_head_model();
    let mut group = c.benchmark_group("reduced_head_forward_backward_batch64");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| {
                let pass = model.forward(&x, exec).unwrap();
                let d_y = DenseMatrix::from_fn(pass.y.rows(), pass.y.cols(), |i, j| {
                    ((i + j) as f64).sin()
                });
                model.backward(&pass, &d_y, exec).unwrap()
            });
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_gemm,
    bench_svd,
    bench_snapshot_batch,
    bench_reduced_head_batch
);
criterion_main!(benches);
