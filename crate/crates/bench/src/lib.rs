//! Shared fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wlan_core::ingest::Salt;
use wlan_core::simulator::{generate_month, SimConfig};
use wlan_core::SessionRecord;

/// `n` points in `d` dimensions: a unit-cube cloud plus a few far points.
pub fn cloud(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let far = if i % 50 == 49 { 10.0 } else { 1.0 };
            (0..d).map(|_| far * rng.random_range(-1.0..1.0)).collect()
        })
        .collect()
}

pub fn salt() -> Salt {
    Salt::from_bytes([7; 16])
}

/// Simulated month of `days` days at the default daily volume.
pub fn month_records(days: usize, seed: u64) -> Vec<SessionRecord> {
    let cfg = SimConfig {
        days,
        ..SimConfig::default()
    };
    let salt = salt();
    generate_month(&cfg, seed, &salt)
        .expect("valid config")
        .session_records(&salt)
}
