//! Runs the pipeline on simulated months and prints detection quality.
//!
//! `cargo run --release -p wlan-core --example detection_quality -- [seeds]`

use wlan_core::ingest::Salt;
use wlan_core::pipeline::{evaluate, run_pipeline, PipelineConfig};
use wlan_core::simulator::{generate_month, SimConfig};
use wlan_core::AnomalyType;

fn main() {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    let cfg = SimConfig::default();
    let salt = Salt::from_bytes([1; 16]);
    for seed in 42..42 + seeds {
        let month = generate_month(&cfg, seed, &salt).expect("valid config");
        let records = month.session_records(&salt);
        let run = run_pipeline(&records, &PipelineConfig::default()).expect("pipeline runs");
        let counts: Vec<usize> = run.daily_anomaly_counts.values().copied().collect();
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        let eval = evaluate(&run.anomalies, &month.truth);
        print!(
            "seed {seed}: mean/day {mean:.2} max {} | recall {:.3}",
            counts.iter().max().unwrap(),
            eval.overall.recall.unwrap_or(f64::NAN)
        );
        for t in &eval.per_type {
            if t.injected + t.detected > 0 {
                print!(
                    " | {} {}/{} det {}/{}",
                    t.kind.unwrap().name(),
                    t.recalled,
                    t.injected,
                    t.correct,
                    t.detected
                );
            }
        }
        println!();
        if std::env::var("SHOW").is_ok() {
            for e in run
                .anomalies
                .iter()
                .filter(|e| matches!(e.kind, AnomalyType::AuthBurst | AnomalyType::DnsAnomaly))
            {
                println!(
                    "   {} {:?} {:?} {:.2} {:?}",
                    e.id, e.detector, e.severity, e.score, e.evidence.metrics
                );
            }
            for i in month
                .truth
                .injections
                .iter()
                .filter(|i| matches!(i.kind, AnomalyType::AuthBurst | AnomalyType::DnsAnomaly))
            {
                println!("   truth {} {} {:.1}", i.day, i.kind.name(), i.magnitude);
            }
        }
    }
}
