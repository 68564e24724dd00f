use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wlan_bench::cloud;
use wlan_core::detection::{dbscan, fit_isolation_forest, iforest_score, ForestParams};

fn iforest(c: &mut Criterion) {
    let mut g = c.benchmark_group("iforest");
    for n in [256, 4096] {
        let pts = cloud(n, 8, 1);
        let params = ForestParams {
            n_trees: 100,
            subsample_size: 64,
            seed: 0,
        };
        g.bench_with_input(BenchmarkId::new("fit", n), &pts, |b, pts| {
            b.iter(|| fit_isolation_forest(black_box(pts), &params).unwrap())
        });
        let model = fit_isolation_forest(&pts, &params).unwrap();
        g.bench_with_input(BenchmarkId::new("score_all", n), &pts, |b, pts| {
            b.iter(|| pts.iter().map(|p| iforest_score(&model, p)).sum::<f64>())
        });
    }
    g.finish();
}

fn dbscan_bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("dbscan");
    for n in [60, 500, 2000] {
        let pts = cloud(n, 4, 2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, pts| {
            b.iter(|| dbscan(black_box(pts), 0.5, 4))
        });
    }
    g.finish();
}

criterion_group!(benches, iforest, dbscan_bench);
criterion_main!(benches);
