//! Data-parallel kernels on the default rayon pool against a one-thread
//! pool. Built without the `parallel` feature, only the sequential path runs.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ctrnn_synth::analysis::estimate_lipschitz;
use ctrnn_synth::dataset::{sample_uniform, Dataset};
use ctrnn_synth::ffnet::{train, Activation, FfNet, TrainConfig};
use ctrnn_synth::integrate::{simulate_pairs, Network, TrueSystem};
use ctrnn_synth::synthesis::{synthesize, SynthRnn};
use ctrnn_synth::systems::{self, VectorField};

struct Fixture {
    field: VectorField,
    data: Dataset,
    net: FfNet,
    rnn: SynthRnn,
    initial: Vec<Vec<f64>>,
}

fn fixture() -> Fixture {
    let field = systems::van_der_pol(1.0, 1.0);
    let data = sample_uniform(&field, 20_000, 1).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 256,
        seed: 1,
        ..TrainConfig::default()
    };
    let net = train(&data, 20, Activation::Tanh, &cfg).unwrap().net;
    let rnn = synthesize(&net, 1e6).unwrap();
    let initial = (0..8).map(|i| vec![-3.0 + 0.8 * i as f64, 1.0]).collect();
    Fixture {
        field,
        data,
        net,
        rnn,
        initial,
    }
}

fn kernels(c: &mut Criterion, label: &str, run: &dyn Fn(&mut (dyn FnMut() + Send))) {
    let fx = fixture();
    let mut g = c.benchmark_group("kernels");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("sample_200k", label), |b| {
        b.iter(|| {
            run(&mut || {
                black_box(sample_uniform(&fx.field, 200_000, 2).unwrap());
            })
        })
    });
    let epoch = TrainConfig {
        epochs: 1,
        batch_size: 1024,
        seed: 3,
        ..TrainConfig::default()
    };
    g.bench_function(BenchmarkId::new("train_epoch_m20", label), |b| {
        b.iter(|| {
            run(&mut || {
                black_box(train(&fx.data, fx.net.m, Activation::Tanh, &epoch).unwrap());
            })
        })
    });
    g.bench_function(BenchmarkId::new("simulate_8_orbits", label), |b| {
        b.iter(|| {
            run(&mut || {
                black_box(
                    simulate_pairs(
                        TrueSystem::Field(&fx.field),
                        Network::Rnn(&fx.rnn),
                        &fx.initial,
                        1e-3,
                        5.0,
                    )
                    .unwrap(),
                );
            })
        })
    });
    g.bench_function(BenchmarkId::new("lipschitz_20k", label), |b| {
        b.iter(|| {
            run(&mut || {
                black_box(estimate_lipschitz(&fx.field, 20_000, 4).unwrap());
            })
        })
    });
    g.finish();
}

#[cfg(feature = "parallel")]
fn compare(c: &mut Criterion) {
    kernels(c, "pool", &|f| f());
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    kernels(c, "one_thread", &|f| single.install(f));
}

#[cfg(not(feature = "parallel"))]
fn compare(c: &mut Criterion) {
    kernels(c, "sequential", &|f| f());
}

criterion_group!(benches, compare);
criterion_main!(benches);
