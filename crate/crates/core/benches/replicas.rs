use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use smelab::epoched_noise::{BridgeFamilySpec, BridgeSampler, BridgeScheme};
use smelab::error_analysis::sgd_mean_excess_d1;
use smelab::exec::map_replicas;
use smelab::risk_models::{FeatureLaw, LinRegModel};
use smelab::{Execution, StreamKey};

fn sgd_replicas(c: &mut Criterion) {
    let model = LinRegModel::scalar(1.0, -1.0, 1.0, FeatureLaw::Gaussian).unwrap();
    let key = StreamKey::new(7);
    let mut g = c.benchmark_group("sgd_mean_excess");
    for exec in [Execution::Sequential, Execution::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| sgd_mean_excess_d1(&model, 4, 0.5, 0.0, 0.05, 20_000, &key, exec).unwrap())
        });
    }
    g.finish();
}

fn bridge_replicas(c: &mut Criterion) {
    let sampler =
        BridgeSampler::new(BridgeFamilySpec { scheme: BridgeScheme::RandomReshuffle, epochs: 4, m: 256 }).unwrap();
    let key = StreamKey::new(11);
    let mut g = c.benchmark_group("bridge_samples");
    for exec in [Execution::Sequential, Execution::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| map_replicas(exec, 2_000, |r| sampler.sample(1, &mut key.child(r).rng())))
        });
    }
    g.finish();
}

criterion_group!(benches, sgd_replicas, bridge_replicas);
criterion_main!(benches);
