use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use udts_core::baselines::Scheme;
use udts_core::exec::Execution;
use udts_core::link::NetworkModel;
use udts_core::marl::{train_maa2c_with, train_mad3qn_with, MarlHyper};
use udts_core::montecarlo::{simulate_replications, FadeCoupling};
use udts_core::scenario::sample_deployment;
use udts_core::{ScenarioConfig, SpreadingFactor, Assignment};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_network");
    for n in [1000, 5000, 10_000] {
        let cfg = ScenarioConfig::default().with_devices(n);
        let devices = sample_deployment(&cfg, 1).unwrap();
        let assignment = Scheme::Eab.allocate(&devices, &cfg).unwrap();
        for (name, exec) in MODES {
            let model = NetworkModel::new(&devices, &cfg, exec).unwrap();
            group.bench_with_input(BenchmarkId::new(name, n), &assignment, |b, a| {
                b.iter(|| black_box(model.evaluate(a).unwrap().avg_epp_j))
            });
        }
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_20_episodes");
    group.sample_size(10);
    let cfg = ScenarioConfig::default().with_devices(2000);
    let devices = sample_deployment(&cfg, 2).unwrap();
    let hyper = MarlHyper::default().with_t_max(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("mad3qn", name), |b| {
            b.iter(|| train_mad3qn_with(&devices, &cfg, &hyper, 0, exec).unwrap().final_avg_epp())
        });
        group.bench_function(BenchmarkId::new("maa2c", name), |b| {
            b.iter(|| train_maa2c_with(&devices, &cfg, &hyper, 0, exec).unwrap().final_avg_epp())
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo_8_replications");
    group.sample_size(10);
    let cfg = ScenarioConfig::default().with_devices(1000);
    let devices = sample_deployment(&cfg, 3).unwrap();
    let assignment = Assignment::uniform(1000, SpreadingFactor::SF9);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                simulate_replications(&devices, &assignment, &cfg, 6000.0, 0, 8, FadeCoupling::Shared, exec)
                    .unwrap()
                    .total()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, evaluation, training, simulation);
criterion_main!(benches);
