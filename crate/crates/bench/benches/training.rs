use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nccdet::nccnet::{forward, init_network, train, NormMode, TrainConfig};
use nccdet_bench::batch;

// One epoch over 40 samples with batches of 40 is exactly one SGD step.
fn sgd_step(c: &mut Criterion) {
    let data = batch(40);
    let cfg = TrainConfig {
        max_epochs: 1,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("sgd_step_40");
    for (mode, n) in [
        (NormMode::Std, 1),
        (NormMode::Std, 4),
        (NormMode::Mad, 4),
        (NormMode::None, 4),
    ] {
        let net = init_network(n, 15, mode, 0).unwrap();
        group.bench_with_input(BenchmarkId::new(mode.as_str(), n), &net, |b, net| {
            b.iter(|| train(net, &data, None, &cfg).unwrap())
        });
    }
    group.finish();
}

fn forward_pass(c: &mut Criterion) {
    let data = batch(1);
    let net = init_network(4, 15, NormMode::Std, 0).unwrap();
    c.bench_function("forward_std_4", |b| {
        b.iter(|| forward(&net, &data[0].patch).unwrap())
    });
}

criterion_group!(benches, sgd_step, forward_pass);
criterion_main!(benches);
