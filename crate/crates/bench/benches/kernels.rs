use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flatmagic::groups::{weyl_basis, FiniteAbelianGroup};
use flatmagic::linalg::{haar_unitary, polar};
use flatmagic::magic::fully_split_grid;
use flatmagic::moments::{t_matrix, weyl_lambda_diagonal};
use flatmagic::rng::stream;
use flatmagic::sinkhorn::{flatten_with, phi_map, FlattenOptions, TraceLevel, UnitaryTuple};

fn haar(c: &mut Criterion) {
    let mut g = c.benchmark_group("haar_unitary");
    for n in [2, 4, 8] {
        let mut rng = stream(1, n as u64);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| haar_unitary(n, &mut rng).unwrap())
        });
    }
    g.finish();
}

fn polar_decomposition(c: &mut Criterion) {
    let mut g = c.benchmark_group("polar");
    for n in [2, 4, 8] {
        let m = haar_unitary(n, &mut stream(2, 0)).unwrap() * flatmagic::C64::new(0.7, 0.1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| polar(black_box(m)).unwrap())
        });
    }
    g.finish();
}

fn transfer(c: &mut Criterion) {
    let basis = weyl_basis(&FiniteAbelianGroup::parse("Z2").unwrap());
    let x = basis.sample_unitary(&mut stream(3, 0)).unwrap();
    let grid = fully_split_grid(&basis, &x).unwrap();
    let mut g = c.benchmark_group("t_matrix_pauli");
    for p in [2, 3, 4] {
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, &p| {
            b.iter(|| t_matrix(black_box(&grid), p).unwrap())
        });
    }
    g.finish();

    let h = FiniteAbelianGroup::parse("Z2").unwrap();
    let xs: Vec<_> = (0..2)
        .map(|k| haar_unitary(2, &mut stream(4, k)).unwrap())
        .collect();
    c.bench_function("weyl_lambda_z2_r2", |b| {
        b.iter(|| weyl_lambda_diagonal(&h, black_box(&xs)).unwrap())
    });
}

fn flattening(c: &mut Criterion) {
    let mut g = c.benchmark_group("flatten");
    for n in [3, 4, 5] {
        let x = UnitaryTuple::haar(n, &mut stream(5, n as u64)).unwrap();
        g.bench_with_input(BenchmarkId::new("phi_step", n), &x, |b, x| {
            b.iter(|| phi_map(black_box(x)).unwrap())
        });
        let opts = FlattenOptions {
            max_iters: 10_000,
            tol: 1e-8,
            trace: TraceLevel::Off,
        };
        g.bench_with_input(BenchmarkId::new("to_1e-8", n), &x, |b, x| {
            b.iter(|| flatten_with(black_box(x), &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, haar, polar_decomposition, transfer, flattening);
criterion_main!(benches);
