//! Benchmarks for the hot paths: the dense eigensolve, tensor-product
//! plumbing, typicality machinery, and the full compression pipeline on the
//! reference qubit problems.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use povm_squeeze_core::linalg::{
    cplx, diag_real, eig_hermitian, partial_trace, tensor_power, tensor_product, CMatrix,
};
use povm_squeeze_core::pipeline::{compress, product_family, CompressionConfig};
use povm_squeeze_core::quantum::{canonical_ensemble, DensityMatrix, Povm};
use povm_squeeze_core::typicality::{typical_projector, typical_sequences};

/// A dense, well-conditioned Hermitian test matrix with no special structure.
fn test_hermitian(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| {
        let (i, j) = (i as f64, j as f64);
        if i == j {
            cplx(2.0 + (1.3 * i).sin(), 0.0)
        } else {
            cplx((0.7 * (i + j)).sin(), (0.3 * (i - j)).sin()) * cplx(0.2, 0.0)
        }
    })
}

fn flat_qubit() -> DensityMatrix {
    DensityMatrix::new(CMatrix::identity(2, 2) * cplx(0.5, 0.0)).unwrap()
}

fn rank2_povm() -> Povm {
    Povm::new(vec![diag_real(&[0.7, 0.3]), diag_real(&[0.3, 0.7])]).unwrap()
}

fn bench_eig(c: &mut Criterion) {
    let mut group = c.benchmark_group("eig_hermitian");
    for d in [8usize, 16, 32, 64] {
        let m = test_hermitian(d);
        group.bench_with_input(BenchmarkId::from_parameter(d), &m, |b, m| {
            b.iter(|| eig_hermitian(black_box(m)).unwrap())
        });
    }
    group.finish();
}

fn bench_tensor(c: &mut Criterion) {
    let a = test_hermitian(8);
    let b2 = test_hermitian(8);
    c.bench_function("tensor_product_8x8", |b| {
        b.iter(|| tensor_product(black_box(&a), black_box(&b2)))
    });
    let qubit = test_hermitian(2);
    c.bench_function("tensor_power_2^6", |b| b.iter(|| tensor_power(black_box(&qubit), 6)));
    let big = tensor_power(&qubit, 6);
    let dims = [2usize; 6];
    c.bench_function("partial_trace_2^6_to_site", |b| {
        b.iter(|| partial_trace(black_box(&big), &dims, &[0, 1, 2, 4, 5]).unwrap())
    });
}

fn bench_typicality(c: &mut Criterion) {
    let rho = flat_qubit();
    let canon = canonical_ensemble(&rho, &rank2_povm()).unwrap();
    let probs = canon.ensemble.probs().to_vec();
    c.bench_function("typical_sequences_l12", |b| {
        b.iter(|| typical_sequences(black_box(&probs), 12, 3.0).unwrap())
    });
    c.bench_function("typical_projector_l6", |b| {
        b.iter(|| typical_projector(black_box(&rho), 6, 3.0).unwrap())
    });
}

fn bench_product_family(c: &mut Criterion) {
    let a = rank2_povm();
    c.bench_function("product_family_l6", |b| {
        b.iter(|| product_family(black_box(&a), 6, 1 << 20).unwrap())
    });
}

fn bench_compress(c: &mut Criterion) {
    let rho = flat_qubit();
    let mut group = c.benchmark_group("compress_rank2");
    group.sample_size(10);
    for l in [3usize, 4, 5] {
        let a = rank2_povm();
        let config = CompressionConfig { l, delta: 3.0, seed: 17, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, _| {
            b.iter(|| compress(black_box(&rho), black_box(&a), &config, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_eig,
    bench_tensor,
    bench_typicality,
    bench_product_family,
    bench_compress
);
criterion_main!(benches);
