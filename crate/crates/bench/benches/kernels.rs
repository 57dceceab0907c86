use astro_bench::{batch, graph, model, scores, tensor};
use astro_core::nn::{gcn_layer, Tensor};
use astro_core::threshold::SortedScores;
use astro_core::{normalized_operator, tune, TunerConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    for (subs, per) in [(4, 2), (6, 9)] {
        let g = graph(subs, per);
        let m = model(&g, 10);
        for size in [1, 64] {
            let x = batch(g.n_nodes, 10, size);
            group.throughput(Throughput::Elements(size as u64));
            group.bench_with_input(BenchmarkId::new(format!("n{}", g.n_nodes), size), &x, |b, x| {
                b.iter(|| m.forward(x).unwrap())
            });
        }
    }
    group.finish();
}

fn train_step(c: &mut Criterion) {
    let g = graph(4, 2);
    let mut m = model(&g, 10);
    let x = batch(g.n_nodes, 10, 64);
    c.bench_function("loss_and_grad/n8/b64", |b| b.iter(|| m.loss_and_grad(&x, 9.0).unwrap()));
}

fn gcn(c: &mut Criterion) {
    let mut group = c.benchmark_group("gcn_layer");
    for (subs, per) in [(4, 2), (6, 9)] {
        let g = graph(subs, per);
        let n = g.n_nodes;
        let op = Tensor::matrix(n, n, normalized_operator(&g).unwrap()).unwrap();
        let h = tensor(vec![64 * 10 * n, 32], 0.1);
        let w = tensor(vec![32, 32], 0.2);
        let bias = tensor(vec![32], 0.3);
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| gcn_layer(&h, &op, &w, &bias).unwrap())
        });
    }
    group.finish();
}

fn threshold(c: &mut Criterion) {
    let s = scores(10_000);
    c.bench_function("f1_lookup/10500", |b| {
        let sorted = SortedScores::new(&s);
        b.iter(|| (0..=100).map(|k| sorted.f1_at(k as f64 / 100.0)).sum::<f64>())
    });
    let cfg = TunerConfig {
        episodes: 5,
        ..TunerConfig::default()
    };
    let mut group = c.benchmark_group("tune");
    group.sample_size(10);
    group.bench_function("5x100/10500", |b| b.iter(|| tune(&s, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, forward, train_step, gcn, threshold);
criterion_main!(benches);
