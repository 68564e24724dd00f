use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use wlan_bench::{month_records, salt};
use wlan_core::descriptive::{aggregate_all, AggregateConfig};
use wlan_core::pipeline::{run_pipeline, PipelineConfig};
use wlan_core::simulator::{generate_month, SimConfig};

fn generate(c: &mut Criterion) {
    let cfg = SimConfig {
        days: 7,
        ..SimConfig::default()
    };
    let salt = salt();
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.bench_function("week", |b| {
        b.iter(|| generate_month(&cfg, black_box(42), &salt).unwrap())
    });
    g.finish();
}

fn aggregate(c: &mut Criterion) {
    let records = month_records(30, 42);
    let cfg = AggregateConfig::default();
    let mut g = c.benchmark_group("descriptive");
    g.sample_size(10);
    g.bench_function("aggregate_month", |b| {
        b.iter(|| aggregate_all(black_box(&records), &cfg))
    });
    g.finish();
}

fn full(c: &mut Criterion) {
    let records = month_records(30, 43);
    let cfg = PipelineConfig::default();
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("month", |b| {
        b.iter(|| run_pipeline(black_box(&records), &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, generate, aggregate, full);
criterion_main!(benches);
