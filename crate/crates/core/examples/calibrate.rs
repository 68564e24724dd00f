//! Prints the monthly statistics the simulator is calibrated against.
//!
//! `cargo run --release -p wlan-core --example calibrate -- [seeds] [key=value ...]`

use wlan_core::descriptive::{aggregate_all, correlation, hourly_profile, AggregateConfig};
use wlan_core::ingest::Salt;
use wlan_core::simulator::{generate_month, SimConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut cfg = SimConfig::default();
    let overrides: Vec<String> = args.collect();
    cfg.apply_overrides(&overrides.join("\n"))
        .expect("valid overrides");
    let salt = Salt::from_bytes([1; 16]);
    println!("seed  conn   min   max  sess   auth  traffic  overl  peak  r");
    for seed in 0..seeds {
        let month = generate_month(&cfg, 42 + seed, &salt).expect("valid config");
        let records = month.session_records(&salt);
        let aggs = aggregate_all(&records, &AggregateConfig::default());
        let aggs: Vec<_> = aggs
            .into_iter()
            .filter(|a| a.day >= cfg.start && a.day < cfg.day(cfg.days))
            .collect();
        let n = aggs.len() as f64;
        let mean =
            |f: &dyn Fn(&wlan_core::DailyAggregate) -> f64| aggs.iter().map(f).sum::<f64>() / n;
        let conns: Vec<f64> = aggs.iter().map(|a| a.connections as f64).collect();
        let gb: Vec<f64> = aggs.iter().map(|a| a.traffic_gb).collect();
        println!(
            "{:>4} {:>5.0} {:>5.0} {:>5.0} {:>5.1} {:>6.1} {:>7.1} {:>6.2} {:>4} {:.3}",
            42 + seed,
            mean(&|a| a.connections as f64),
            conns.iter().cloned().fold(f64::INFINITY, f64::min),
            conns.iter().cloned().fold(0.0, f64::max),
            mean(&|a| a.mean_session_minutes),
            mean(&|a| a.auth_failures as f64),
            mean(&|a| a.traffic_gb),
            mean(&|a| a.overload_pct),
            hourly_profile(&records).peak_hour(),
            correlation(&conns, &gb).unwrap(),
        );
    }
}
