use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use outage_core::detector::{detect_with, DetectorParams};
use outage_core::evaluate::{evaluate, EvaluationConfig};
use outage_core::fixtures;
use outage_core::grid::DcSolver;
use outage_core::scenario::{simulate_scenario, ScenarioConfig};
use outage_core::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn n_minus_1_lodf(c: &mut Criterion) {
    let net = fixtures::random_network(300, 150, 11);
    let solver = DcSolver::new(&net).unwrap();
    let outages = net.non_islanding_outages();
    let mut group = c.benchmark_group("lodf_sweep_300_bus");
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mode.map(&outages, |&m| solver.lodf(m).unwrap().max_abs()))
        });
    }
    group.finish();
}

fn detection(c: &mut Criterion) {
    let net = fixtures::ne39();
    let mut cfg = ScenarioConfig::new("fixture:ne39", 3);
    cfg.duration = 600.0;
    cfg.event_time = 300.0;
    let data = simulate_scenario(&net, &cfg).unwrap();
    let params = DetectorParams::default();
    let mut group = c.benchmark_group("detect_ne39_10min");
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| detect_with(&data, &params, mode).unwrap())
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let net = fixtures::ne39();
    let mut group = c.benchmark_group("evaluate_ne39_n_minus_1");
    group.sample_size(10);
    for (name, mode) in MODES {
        let cfg = EvaluationConfig {
            execution: mode,
            ..EvaluationConfig::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate(&net, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, n_minus_1_lodf, detection, evaluation);
criterion_main!(benches);
