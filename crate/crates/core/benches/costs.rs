//! Hot-path micro-benchmarks: KL cost/gradient evaluation and the Cayley
//! retraction step at one- and two-qubit sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use krausopt::opt::{cayley_step, CostFunction};
use krausopt::sample::{sample_random_channel, sample_unitary_init, Prng};
use krausopt::tomo::{exact_statistics, KlCost};
use rand::SeedableRng;
use std::hint::black_box;
use std::time::Duration;

fn bench_kl(c: &mut Criterion) {
    let mut group = c.benchmark_group("kl_value_and_grad");
    for &(n, m) in &[(1usize, 4usize), (2, 16)] {
        let d = 1 << n;
        let mut rng = Prng::seed_from_u64(7);
        let target = sample_random_channel(d, d, &mut rng).unwrap();
        let data = exact_statistics(&target, n).unwrap();
        let cost = KlCost::new(&data);
        let model = sample_unitary_init(d, m, &mut rng).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("n{n}_m{m}")), &model, |b, k| {
            b.iter(|| black_box(cost.value_and_grad(k).unwrap()))
        });
    }
    group.finish();
}

fn bench_cayley(c: &mut Criterion) {
    let mut group = c.benchmark_group("cayley_step");
    for &(d, m) in &[(2usize, 4usize), (4, 16)] {
        let mut rng = Prng::seed_from_u64(9);
        let k = sample_unitary_init(d, m, &mut rng).unwrap();
        let g = sample_unitary_init(d, m, &mut rng).unwrap().matrix().clone();
        group.bench_with_input(BenchmarkId::from_parameter(format!("d{d}_m{m}")), &(k, g), |b, (k, g)| {
            b.iter(|| black_box(cayley_step(k, g, 1.0).unwrap()))
        });
    }
    group.finish();
}

fn config() -> Criterion {
    Criterion::default()
        .sample_size(20)
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(3))
}

criterion_group! {
    name = benches;
    config = config();
    targets = bench_kl, bench_cayley
}
criterion_main!(benches);
