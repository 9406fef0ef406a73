use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rprobe::cca::{cca_fit, CcaConfig, CcaSummary};
use rprobe::discretize::{kmeans_fit, KMeansConfig};
use rprobe::freetasks::{dtw_distance, DtwNorm};
use rprobe::simkernels::linear_cka;
use rprobe_bench::{features_and_one_hot, segment_pair};

fn pwcca(c: &mut Criterion) {
    let mut g = c.benchmark_group("pwcca");
    g.sample_size(10);
    let cfg = CcaConfig {
        summary: CcaSummary::Pwcca,
        ..CcaConfig::default()
    };
    for d in [128, 768] {
        let (x, y) = features_and_one_hot(4000, d, 39, 1);
        g.bench_with_input(BenchmarkId::from_parameter(d), &(x, y), |b, (x, y)| {
            b.iter(|| cca_fit(black_box(x), black_box(y), &cfg).unwrap())
        });
    }
    g.finish();
}

fn cka(c: &mut Criterion) {
    let mut g = c.benchmark_group("linear_cka");
    for d in [64, 256] {
        let (x, _) = features_and_one_hot(4000, d, 2, 2);
        let (y, _) = features_and_one_hot(4000, d, 2, 3);
        g.bench_with_input(BenchmarkId::from_parameter(d), &(x, y), |b, (x, y)| {
            b.iter(|| linear_cka(black_box(x), black_box(y)).unwrap())
        });
    }
    g.finish();
}

fn kmeans(c: &mut Criterion) {
    let mut g = c.benchmark_group("kmeans");
    g.sample_size(10);
    let (x, _) = features_and_one_hot(6000, 64, 2, 4);
    for k in [39, 150] {
        let cfg = KMeansConfig {
            max_iters: 20,
            ..KMeansConfig::new(k, 0)
        };
        g.bench_with_input(BenchmarkId::from_parameter(k), &cfg, |b, cfg| {
            b.iter(|| kmeans_fit(black_box(&x), cfg).unwrap())
        });
    }
    g.finish();
}

fn dtw(c: &mut Criterion) {
    let mut g = c.benchmark_group("dtw");
    for len in [25, 100] {
        let (a, b2) = segment_pair(len, len + len / 5, 768, 5);
        g.bench_with_input(BenchmarkId::from_parameter(len), &(a, b2), |b, (a, b2)| {
            b.iter(|| dtw_distance(black_box(a), black_box(b2), DtwNorm::PathLength).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, pwcca, cka, kmeans, dtw);
criterion_main!(benches);
