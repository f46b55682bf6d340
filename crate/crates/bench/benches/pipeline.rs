use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use helpfusion_bench::{balanced_train_set, default_streams};
use helpfusion_core::harness::{cell_seed, run_iteration, FeatureMatrix};
use helpfusion_core::learners::{self, ForestParams};
use helpfusion_core::windowing::build_corpus;
use helpfusion_core::{Algorithm, ExperimentConfig, LearnerParams};

fn windowing(c: &mut Criterion) {
    let streams = default_streams();
    c.bench_function("window corpus s=50", |b| b.iter(|| build_corpus(black_box(&streams), 50).unwrap()));
}

fn learners_fit(c: &mut Criterion) {
    let streams = default_streams();
    let train = balanced_train_set(&streams, 10);
    let mut params = LearnerParams::default();
    params.forest = ForestParams {
        n_estimators: 100,
        ..ForestParams::default()
    };
    let mut group = c.benchmark_group("fit s=10");
    group.sample_size(10);
    for alg in Algorithm::LEARNERS {
        group.bench_function(alg.as_str(), |b| b.iter(|| learners::fit(alg, black_box(&train), &params, 1).unwrap()));
    }
    group.finish();
}

fn sweep_cell(c: &mut Criterion) {
    let streams = default_streams();
    let corpus = FeatureMatrix::build(&streams, 10).unwrap();
    let config = ExperimentConfig::quick();
    let mut group = c.benchmark_group("cell s=10");
    group.sample_size(10);
    for alg in [Algorithm::Tree, Algorithm::GaussianNb, Algorithm::RandomBaseline] {
        let seed = cell_seed(config.master_seed, 10, alg, 0);
        group.bench_function(alg.as_str(), |b| b.iter(|| run_iteration(&corpus, alg, 0, seed, &config).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, windowing, learners_fit, sweep_cell);
criterion_main!(benches);
