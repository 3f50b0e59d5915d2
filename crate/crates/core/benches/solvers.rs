//! Solver throughput on a one-thread pool (the sequential path) against the
//! default pool. Build with `--no-default-features` to time the rayon-free
//! fallback itself.

use std::time::Duration;

use cirl_core::domains::preset;
use cirl_core::eval::{monte_carlo, HumanBehavior, RobotPolicy};
use cirl_core::exact::{adapted_value_iteration, ExactConfig};
use cirl_core::pbvi::{pbvi_solve, Budget, PbviConfig, PbviVariant};
use cirl_core::{CirlGame, HumanModel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn game(name: &str) -> CirlGame {
    preset(name).unwrap().build().unwrap()
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let default = rayon::ThreadPoolBuilder::new().build().unwrap();
    let n = default.current_num_threads();
    vec![
        ("1-thread".into(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        (format!("{n}-threads"), default),
    ]
}

fn exact_vi(c: &mut Criterion) {
    let mut group = c.benchmark_group("adapted_vi");
    group.sample_size(10).measurement_time(Duration::from_secs(5));
    for name in ["chefworld-4x3", "chefworld-6x2"] {
        let g = game(name);
        for (label, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, &label), &g, |b, g| {
                b.iter(|| pool.install(|| adapted_value_iteration(g, &ExactConfig::default()).unwrap().value))
            });
        }
    }
    group.finish();
}

fn pbvi(c: &mut Criterion) {
    let mut group = c.benchmark_group("pbvi");
    group.sample_size(10).measurement_time(Duration::from_secs(5));
    let g = game("chefworld-2x5");
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::new("chefworld-2x5", &label), |b| {
            b.iter(|| pool.install(|| pbvi_solve(&g, &PbviConfig::new(PbviVariant::Adapted, Budget::Expansions(2), 0)).unwrap().value))
        });
    }
    group.finish();
}

fn episodes(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    let g = game("chefworld-4x3");
    let plan = adapted_value_iteration(&g, &ExactConfig::default()).unwrap().policy;
    let human = HumanBehavior::Pedagogic(HumanModel::boltzmann(5.0));
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::new("chefworld-4x3", &label), |b| {
            b.iter(|| pool.install(|| monte_carlo(&g, &RobotPolicy::Plan(&plan), &human, 10_000, 0).unwrap().success_rate))
        });
    }
    group.finish();
}

criterion_group!(benches, exact_vi, pbvi, episodes);
criterion_main!(benches);
