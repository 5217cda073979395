use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qflow::config::Tolerances;
use qflow::oracle::{oracle_solution, DEFAULT_PATH_CAP};
use qflow::pipeline::{extract, solve};
use qflow::sim::{simulate_chain, Scheduling, SimulationConfig};
use qflow_bench::{backbone, random_problems};

fn backbone_pipeline(c: &mut Criterion) {
    let problem = backbone(2020);
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("backbone");
    group.sample_size(20);
    group.bench_function("build_lp", |b| b.iter(|| black_box(problem.edge_lp())));
    group.bench_function("solve", |b| b.iter(|| black_box(solve(&problem).unwrap())));
    let solved = solve(&problem).unwrap();
    group.bench_function("extract", |b| {
        b.iter(|| black_box(extract(&problem, &solved.flow, &tol).unwrap()))
    });
    group.finish();
}

fn edge_lp_vs_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("random");
    for nodes in [6, 8, 10] {
        let problems = random_problems(20, nodes);
        group.bench_with_input(BenchmarkId::new("edge_lp", nodes), &problems, |b, ps| {
            b.iter(|| {
                ps.iter()
                    .map(|p| solve(p).unwrap().flow.objective_value)
                    .sum::<f64>()
            })
        });
        group.bench_with_input(
            BenchmarkId::new("path_oracle", nodes),
            &problems,
            |b, ps| {
                b.iter(|| {
                    ps.iter()
                        .map(|p| {
                            oracle_solution(&p.graph, &p.demands, p.q(), DEFAULT_PATH_CAP)
                                .unwrap()
                                .objective
                        })
                        .sum::<f64>()
                })
            },
        );
    }
    group.finish();
}

fn chain_simulation(c: &mut Criterion) {
    let cfg = SimulationConfig {
        trials: 100_000,
        seed: 1,
        q: 0.5,
        werner: 0.99,
        scheduling: Scheduling::Sequential,
    };
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("chain_4_links_1e5_trials", |b| {
        b.iter(|| black_box(simulate_chain(&[2.0, 5.0, 3.0, 4.0], &cfg).unwrap()))
    });
    group.finish();
}

criterion_group!(
    benches,
    backbone_pipeline,
    edge_lp_vs_oracle,
    chain_simulation
);
criterion_main!(benches);
