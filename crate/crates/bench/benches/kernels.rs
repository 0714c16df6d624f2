use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use hdal_bench::{blob_rows, fixture};
use hdal_core::acquisition::{score_pool, select_batch_diverse, select_batch_topk};
use hdal_core::{Encoder, Strategy};

fn encoding(c: &mut Criterion) {
    let dataset = blob_rows(1000, 32);
    let rows = dataset.train_rows();
    let mut group = c.benchmark_group("encode");
    for dim in [1000, 4000] {
        let encoder = Encoder::fit(&rows, dim, 0.18, 1).unwrap();
        group.throughput(Throughput::Elements(1));
        group.bench_with_input(BenchmarkId::from_parameter(dim), &encoder, |b, enc| {
            b.iter(|| enc.encode(black_box(rows[0])).unwrap())
        });
    }
    group.finish();
}

fn pool_scoring(c: &mut Criterion) {
    let mut group = c.benchmark_group("score_pool");
    group.sample_size(10);
    for n in [1000, 4000] {
        let f = fixture(n, 2000, 8);
        group.throughput(Throughput::Elements(f.pool.unlabeled_len() as u64));
        for strategy in [Strategy::Heal, Strategy::Entropy] {
            group.bench_with_input(BenchmarkId::new(strategy.as_str(), n), &f, |b, f| {
                b.iter(|| score_pool(&f.pool, &f.encoded, &f.ensemble, strategy, 0).unwrap())
            });
        }
    }
    group.finish();
}

fn selection(c: &mut Criterion) {
    let f = fixture(4000, 2000, 8);
    let assessed = score_pool(&f.pool, &f.encoded, &f.ensemble, Strategy::Heal, 0).unwrap();
    let classes = f.dataset.num_classes();
    let mut group = c.benchmark_group("select");
    for k in [20, 200] {
        group.bench_with_input(BenchmarkId::new("topk", k), &k, |b, &k| b.iter(|| select_batch_topk(&assessed, k)));
        group.bench_with_input(BenchmarkId::new("diverse", k), &k, |b, &k| {
            b.iter(|| select_batch_diverse(&assessed, &f.encoded, classes, k, 0.4))
        });
    }
    group.finish();
}

criterion_group!(benches, encoding, pool_scoring, selection);
criterion_main!(benches);
