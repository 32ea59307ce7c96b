use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ilens_core::parametric::DecayOperator;
use ilens_core::{extract, mobius_and, mobius_or, zeta_or, ExtractConfig, LatticeVector, SyntheticModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vector(n: usize) -> LatticeVector {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    LatticeVector::from_fn(n, |_| rng.random_range(-1.0..1.0)).unwrap()
}

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("mobius");
    for n in [8, 10, 12, 14] {
        let u = random_vector(n);
        g.bench_with_input(BenchmarkId::new("and", n), &u, |b, u| b.iter(|| mobius_and(black_box(u))));
        g.bench_with_input(BenchmarkId::new("or", n), &u, |b, u| b.iter(|| mobius_or(black_box(u))));
        g.bench_with_input(BenchmarkId::new("zeta_or", n), &u, |b, u| b.iter(|| zeta_or(black_box(u))));
    }
    g.finish();
}

fn extraction(c: &mut Criterion) {
    let mut g = c.benchmark_group("extract");
    g.sample_size(10);
    for n in [6, 8, 10] {
        let t = SyntheticModel::random(n, 12, (0.5, 3.0), 0).unwrap().table().unwrap();
        let cfg = ExtractConfig {
            iterations: 2_000,
            ..ExtractConfig::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| b.iter(|| extract(black_box(t), &cfg).unwrap()));
    }
    g.finish();
}

fn decay(c: &mut Criterion) {
    let mut g = c.benchmark_group("decay");
    g.sample_size(10);
    for n in [6, 8, 10] {
        let i_star = SyntheticModel::random(n, 20, (0.5, 3.0), 1).unwrap().interactions(0.0).unwrap();
        g.bench_with_input(BenchmarkId::new("build", n), &n, |b, &n| b.iter(|| DecayOperator::new(black_box(0.1), n).unwrap()));
        let op = DecayOperator::new(0.1, n).unwrap();
        g.bench_with_input(BenchmarkId::new("predict", n), &i_star, |b, s| b.iter(|| op.predict(black_box(s)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, transforms, extraction, decay);
criterion_main!(benches);
