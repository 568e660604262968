//! Throughput of prompt-sequence sampling at full experiment scale.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use boolicl::sampler::{
    derive_seed, sample_sequence_with_seed, TaskConfig, TaskKind,
};
use boolicl::teaching::{sample_mixture_with_seed, sample_teach_sequence_with_seed};

fn bench_vanilla(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_sequence");
    let cases = [
        ("conjunction_28x70", TaskConfig::new(TaskKind::Conjunction, 28, 70)),
        ("parity_20x140", TaskConfig::new(TaskKind::Parity, 20, 140)),
        ("dnf3_28x100", TaskConfig::new(TaskKind::Dnf3, 28, 100)),
        ("nearest_neighbor_10x100", TaskConfig::new(TaskKind::NearestNeighbor, 10, 100)),
    ];
    for (name, cfg) in cases {
        cfg.validate().unwrap();
        group.bench_function(name, |b| {
            let mut i = 0u64;
            b.iter(|| {
                i += 1;
                black_box(sample_sequence_with_seed(&cfg, derive_seed(7, i)).unwrap())
            });
        });
    }
    group.finish();
}

fn bench_teach(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_teach");
    let conj = TaskConfig::new(TaskKind::Conjunction, 28, 70);
    group.bench_function("conjunction_28x70_prefix", |b| {
        let mut i = 0u64;
        b.iter(|| {
            i += 1;
            black_box(sample_teach_sequence_with_seed(&conj, derive_seed(7, i)).unwrap())
        });
    });
    group.bench_function("conjunction_28x70_mixture", |b| {
        let mut i = 0u64;
        b.iter(|| {
            i += 1;
            black_box(sample_mixture_with_seed(&conj, 0.5, derive_seed(7, i)).unwrap())
        });
    });
    group.finish();
}

criterion_group!(benches, bench_vanilla, bench_teach);
criterion_main!(benches);
