use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lfsgg_bench::{large_pairs, small_pairs};
use lfsgg_core::metrics::{evaluate_dataset, EvalOptions};
use lfsgg_core::{exhaustive_match, first_order_match, hts_match, MatchConfig};

fn branching_factor(c: &mut Criterion) {
    let pairs = large_pairs(20);
    let mut group = c.benchmark_group("hts_large");
    for b in [1, 2, 3, 6] {
        let cfg = MatchConfig::with_branching_factor(b);
        group.bench_with_input(BenchmarkId::from_parameter(b), &cfg, |bench, cfg| {
            bench.iter(|| {
                for p in &pairs {
                    black_box(hts_match(&p.gt, &p.pred, cfg).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn matchers(c: &mut Criterion) {
    let pairs = small_pairs(50);
    let mut group = c.benchmark_group("matchers_small");
    group.bench_function("hts_b3", |b| {
        let cfg = MatchConfig::default();
        b.iter(|| pairs.iter().map(|p| hts_match(&p.gt, &p.pred, &cfg).unwrap().matched).sum::<usize>())
    });
    group.bench_function("exhaustive", |b| {
        b.iter(|| pairs.iter().map(|p| exhaustive_match(&p.gt, &p.pred).unwrap().matched).sum::<usize>())
    });
    group.bench_function("first_order", |b| {
        b.iter(|| pairs.iter().map(|p| first_order_match(&p.gt, &p.pred).matched).sum::<usize>())
    });
    group.finish();
}

fn dataset(c: &mut Criterion) {
    let pairs = small_pairs(200);
    let gt: Vec<_> = pairs.iter().map(|p| p.gt.clone()).collect();
    let pred: Vec<_> = pairs.iter().map(|p| p.pred.clone()).collect();
    let opts = EvalOptions::default();
    c.bench_function("evaluate_200", |b| b.iter(|| evaluate_dataset(&gt, &pred, &opts).unwrap()));
}

criterion_group!(benches, branching_factor, matchers, dataset);
criterion_main!(benches);
