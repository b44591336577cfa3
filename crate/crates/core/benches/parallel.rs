//! Sequential against rayon execution for the two data-parallel hot spots:
//! Monte-Carlo marginal histograms and the (theta, p_bar) sweep.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eeopa_core::experiments::{sweep, Algorithm, Scenario, SweepSpec};
use eeopa_core::marginals::{mc_marginals, HistogramSpec};
use eeopa_core::{AntennaConfig, Execution, RandomStream};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_histograms(c: &mut Criterion) {
    let config = AntennaConfig::new(4, 4).unwrap();
    let spec = HistogramSpec::for_config(config);
    let mut group = c.benchmark_group("mc_marginals_4x4_200k");
    group
        .sample_size(10)
        .measurement_time(Duration::from_secs(10));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mc_marginals(config, 200_000, RandomStream::new(3, 0), spec, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let spec = SweepSpec::new(
        Scenario::new(3, 2).unwrap(),
        vec![1e-4, 1e-3, 1e-2, 1e-1],
        vec![0.1, 0.2, 0.3, 0.4],
        vec![Algorithm::Eeopa, Algorithm::Apa],
        RandomStream::new(3, 0),
    )
    .unwrap();
    let mut group = c.benchmark_group("sweep_3x2_4x4_grid");
    group
        .sample_size(10)
        .measurement_time(Duration::from_secs(10));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep(&spec, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_histograms, bench_sweep);
criterion_main!(benches);
