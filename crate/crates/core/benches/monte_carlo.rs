use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use gap_gauge_core::empirical::{bootstrap, sample_dataset, BootstrapOptions};
use gap_gauge_core::exec::Parallelism;
use gap_gauge_core::model::{expand, ReducedModel, SliceMarginals, SliceParams};
use gap_gauge_core::simulation::{MonteCarlo, SamplerConfig};

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Auto),
];

fn monte_carlo(c: &mut Criterion) {
    let configs = [
        (
            "unconstrained",
            SamplerConfig::unconstrained(0.1, 0.1, 0.1, 0.1),
        ),
        (
            "constrained",
            SamplerConfig::constrained(0.05, 0.1, 0.07, 0.09, 0.2, 0.2),
        ),
    ];
    let mut group = c.benchmark_group("monte_carlo_20k");
    group.sample_size(20);
    for (name, config) in configs {
        for (mode, parallelism) in MODES {
            let run = MonteCarlo {
                n_trials: 20_000,
                parallelism,
                ..Default::default()
            };
            group.bench_with_input(BenchmarkId::new(name, mode), &config, |b, cfg| {
                b.iter(|| run.run(black_box(cfg)).unwrap())
            });
        }
    }
    group.finish();
}

fn bootstrap_replicates(c: &mut Criterion) {
    let model = ReducedModel::new(
        SliceParams::new(0.05, 0.1, 0.5, 0.4, 0.6)
            .unwrap()
            .with_d(0.5)
            .unwrap(),
        SliceParams::new(0.07, 0.09, 0.7, 0.6, 0.8)
            .unwrap()
            .with_d(0.5)
            .unwrap(),
    )
    .unwrap();
    let marginals = SliceMarginals::consistent_with(&model, 0.5, [0.3, 0.3]).unwrap();
    let data = sample_dataset(&expand(&model, &marginals).unwrap(), 100_000, 1);
    let mut group = c.benchmark_group("bootstrap_2k");
    group.sample_size(20);
    for (mode, parallelism) in MODES {
        let opts = BootstrapOptions {
            replicates: 2000,
            parallelism,
            ..Default::default()
        };
        group.bench_function(mode, |b| {
            b.iter(|| bootstrap(black_box(&data), &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, bootstrap_replicates);
criterion_main!(benches);
