//! Synthetic campus month with labeled anomaly injection.
//!
//! Every day draws from its own ChaCha8 stream of the run seed, so days can
//! be generated in parallel and the output does not depend on thread count.
//! Devices are locally administered MACs (`02:...`); the ground truth names
//! them by their salted [`DeviceId`] so it lines up with ingested data.
//!
//! Calibration table (defaults of [`SimConfig`]):
//!
//! | quantity | model |
//! |---|---|
//! | connections per day | 6400 weekdays, 4400 weekends, times lognormal noise (sigma 0.06, cut at 2.5 sigma, mean preserving) |
//! | session length | lognormal, median 44 min, sigma 0.35 |
//! | session start | normal around 11.5 h (sd 1.6 h) on 85 % of sessions, uniform 7-21 h on the rest |
//! | AP choice | six named hotspots at their monthly shares, six more at 5.5 % decaying by 0.95, uniform tail |
//! | bytes per session | lognormal, mean 149.5 MB, sigma 0.9, in 1-3 samples |
//! | protocol of a sample | HTTPS .62, HTTP .08, DNS .05, UDP .15, other .10 |
//! | auth failures | Poisson, mean 200 per day |
//! | AP health | one sample per AP and day; latency 25-38 ms plus load, loss 0.5-1.8 % |
//! | injections | Poisson(6) per day clipped to 1..=14 |

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use chrono::{DateTime, Duration, NaiveDate, SecondsFormat, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    is_weekend, local_date, local_midnight, AnomalyType, ApId, DeviceId, Event, Protocol,
    RawRecord, SessionRecord, BYTES_PER_GB,
};
use crate::ingest::{anonymize_device, Salt};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidConfig(msg.into())
}

/// Byte share of each protocol in ordinary traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtoMix {
    pub https: f64,
    pub http: f64,
    pub dns: f64,
    pub udp: f64,
    pub other: f64,
}

impl ProtoMix {
    fn weights(&self) -> [(Protocol, f64); 5] {
        [
            (Protocol::Https, self.https),
            (Protocol::Http, self.http),
            (Protocol::Dns, self.dns),
            (Protocol::Udp, self.udp),
            (Protocol::Other, self.other),
        ]
    }
}

/// Relative frequency of each injected anomaly type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionWeights {
    pub auth_burst: f64,
    pub dns_anomaly: f64,
    pub traffic_spike: f64,
    pub simultaneous_connections: f64,
    pub duplicate_device: f64,
}

impl InjectionWeights {
    fn table(&self) -> [(AnomalyType, f64); 5] {
        [
            (AnomalyType::AuthBurst, self.auth_burst),
            (AnomalyType::DnsAnomaly, self.dns_anomaly),
            (AnomalyType::TrafficSpike, self.traffic_spike),
            (
                AnomalyType::SimultaneousConnections,
                self.simultaneous_connections,
            ),
            (AnomalyType::DuplicateDevice, self.duplicate_device),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// First local day; the default is a Monday.
    pub start: NaiveDate,
    pub days: usize,
    pub ap_count: usize,
    pub weekday_connections: f64,
    pub weekend_connections: f64,
    pub day_noise_sigma: f64,
    pub session_median_minutes: f64,
    pub session_sigma: f64,
    /// Centre and spread, in local hours, of the session-start bump.
    pub peak_hour: f64,
    pub peak_spread_hours: f64,
    /// Share of sessions starting uniformly between 07:00 and 21:00.
    pub background_share: f64,
    pub auth_fail_mean: f64,
    pub bytes_per_session_mb: f64,
    pub bytes_sigma: f64,
    pub proto_mix: ProtoMix,
    /// APs after the named hotspots that form a decaying hot group.
    pub hot_aps: usize,
    pub hot_share: f64,
    pub hot_decay: f64,
    /// Ordinary devices; offenders used by injections come from a separate pool.
    pub device_pool: usize,
    pub offender_pool: usize,
    /// Peak clients at which an AP's latency reaches its full load penalty.
    pub overload_threshold: u32,
    pub load_latency_ms: f64,
    /// Mean injected anomalies per day; 0 disables injection.
    pub anomaly_rate: f64,
    pub anomaly_min: u32,
    pub anomaly_max: u32,
    pub injection_weights: InjectionWeights,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            start: NaiveDate::from_ymd_opt(2025, 4, 7).expect("valid date"),
            days: 30,
            ap_count: 85,
            weekday_connections: 6400.0,
            weekend_connections: 4400.0,
            day_noise_sigma: 0.06,
            session_median_minutes: 44.0,
            session_sigma: 0.35,
            peak_hour: 11.5,
            peak_spread_hours: 1.6,
            background_share: 0.15,
            auth_fail_mean: 200.0,
            bytes_per_session_mb: 149.5,
            bytes_sigma: 0.9,
            proto_mix: ProtoMix {
                https: 0.62,
                http: 0.08,
                dns: 0.05,
                udp: 0.15,
                other: 0.10,
            },
            hot_aps: 6,
            hot_share: 0.055,
            hot_decay: 0.95,
            device_pool: 12_000,
            offender_pool: 60,
            overload_threshold: 50,
            load_latency_ms: 10.0,
            anomaly_rate: 6.0,
            anomaly_min: 1,
            anomaly_max: 14,
            injection_weights: InjectionWeights {
                auth_burst: 0.025,
                dns_anomaly: 0.025,
                traffic_spike: 0.02,
                simultaneous_connections: 0.465,
                duplicate_device: 0.465,
            },
        }
    }
}

/// Monthly connection counts of the named hotspot APs, out of a 174 000
/// connection month.
pub const HOTSPOTS: [(&str, f64); 6] = [
    ("AP-104", 15_240.0),
    ("AP-100", 13_950.0),
    ("AP-106", 12_870.0),
    ("AP-109", 11_220.0),
    ("AP-101", 10_980.0),
    ("AP-105", 9_860.0),
];
const HOTSPOT_MONTH: f64 = 174_000.0;

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.days < 7 {
            return Err(invalid(format!(
                "days must be at least 7, got {}",
                self.days
            )));
        }
        if self.ap_count < 10 {
            return Err(invalid(
                "ap_count must be at least 10 (AP-100 to AP-109 are hotspots)",
            ));
        }
        let positive = [
            ("weekday_connections", self.weekday_connections),
            ("weekend_connections", self.weekend_connections),
            ("session_median_minutes", self.session_median_minutes),
            ("peak_spread_hours", self.peak_spread_hours),
            ("auth_fail_mean", self.auth_fail_mean),
            ("bytes_per_session_mb", self.bytes_per_session_mb),
            ("hot_decay", self.hot_decay),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("day_noise_sigma", self.day_noise_sigma),
            ("session_sigma", self.session_sigma),
            ("bytes_sigma", self.bytes_sigma),
            ("hot_share", self.hot_share),
            ("load_latency_ms", self.load_latency_ms),
            ("anomaly_rate", self.anomaly_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.background_share) {
            return Err(invalid("background_share must lie in [0, 1]"));
        }
        let mix = self.proto_mix.weights();
        if mix.iter().any(|(_, w)| *w < 0.0)
            || (mix.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(invalid("proto_mix must be non-negative and sum to 1"));
        }
        let inj = self.injection_weights.table();
        if inj.iter().any(|(_, w)| *w < 0.0) || inj.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
            return Err(invalid(
                "injection_weights must be non-negative with a positive sum",
            ));
        }
        if self.anomaly_min > self.anomaly_max {
            return Err(invalid("anomaly_min exceeds anomaly_max"));
        }
        if self.device_pool < 1000 {
            return Err(invalid("device_pool must be at least 1000"));
        }
        if self.offender_pool < 3 * self.anomaly_max as usize {
            return Err(invalid("offender_pool must be at least 3 x anomaly_max"));
        }
        if self.device_pool + self.offender_pool >= 1 << 24 {
            return Err(invalid("device pools exceed the MAC address space used"));
        }
        if self.overload_threshold == 0 {
            return Err(invalid("overload_threshold must be positive"));
        }
        let hot: f64 = (0..self.hot_aps)
            .map(|i| self.hot_share * self.hot_decay.powi(i as i32))
            .sum();
        let named: f64 = HOTSPOTS.iter().map(|(_, c)| c / HOTSPOT_MONTH).sum();
        if self.hot_aps > self.ap_count - HOTSPOTS.len() || named + hot >= 1.0 {
            return Err(invalid(
                "hotspot and hot-group shares leave nothing for the other APs",
            ));
        }
        Ok(())
    }

    /// Applies `key=value` lines (`#` comments and blank lines ignored).
    /// Nested fields use dotted keys such as `proto_mix.dns=0.07`.
    pub fn apply_overrides(&mut self, text: &str) -> Result<(), SimError> {
        *self = crate::overrides::apply_overrides(self, text).map_err(invalid)?;
        self.validate()
    }

    pub fn ap_ids(&self) -> Vec<ApId> {
        (0..self.ap_count)
            .map(|i| ApId::new(&format!("AP-{}", 100 + i)).expect("valid label"))
            .collect()
    }

    /// Connection share of each AP, in [`SimConfig::ap_ids`] order.
    pub fn ap_weights(&self) -> Vec<f64> {
        let ids = self.ap_ids();
        let mut w = vec![f64::NAN; ids.len()];
        for (name, count) in HOTSPOTS {
            let i = ids
                .iter()
                .position(|a| a.as_str() == name)
                .expect("hotspot in range");
            w[i] = count / HOTSPOT_MONTH;
        }
        let mut share = self.hot_share;
        let mut hot_left = self.hot_aps;
        for slot in w.iter_mut().filter(|x| x.is_nan()) {
            if hot_left == 0 {
                break;
            }
            *slot = share;
            share *= self.hot_decay;
            hot_left -= 1;
        }
        let assigned: f64 = w.iter().filter(|x| !x.is_nan()).sum();
        let rest = w.iter().filter(|x| x.is_nan()).count();
        let each = (1.0 - assigned) / rest as f64;
        for slot in w.iter_mut().filter(|x| x.is_nan()) {
            *slot = each;
        }
        w
    }

    pub fn day(&self, index: usize) -> NaiveDate {
        self.start + Duration::days(index as i64)
    }
}

/// A device MAC as emitted by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacAddr(pub [u8; 6]);

impl std::fmt::Display for MacAddr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

/// Locally administered MAC of device `index`: two seed-derived bytes then
/// the index, so distinct indices never collide.
pub fn device_mac(seed: u64, index: usize) -> MacAddr {
    let h = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    let i = index as u32;
    MacAddr([
        0x02,
        (h >> 8) as u8,
        h as u8,
        (i >> 16) as u8,
        (i >> 8) as u8,
        i as u8,
    ])
}

/// A generated record still carrying the raw MAC.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub ts: DateTime<Utc>,
    pub mac: MacAddr,
    pub ap: ApId,
    pub event: Event,
}

impl SimRecord {
    pub fn local_date(&self) -> NaiveDate {
        local_date(self.ts)
    }

    fn with_device(&self, device: DeviceId) -> SessionRecord {
        SessionRecord {
            ts: self.ts,
            device,
            ap: self.ap.clone(),
            event: self.event,
        }
    }

    /// Wire form with the raw MAC in the `device` field.
    pub fn to_raw(&self) -> RawRecord {
        // reuse the record encoder, then put the MAC back
        let mut raw = self.with_device(DeviceId::from_bytes([0; 16])).to_raw();
        raw.device = self.mac.to_string();
        raw
    }
}

/// One injected anomaly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedAnomaly {
    pub day: NaiveDate,
    #[serde(rename = "type")]
    pub kind: AnomalyType,
    pub devices: Vec<DeviceId>,
    pub aps: Vec<ApId>,
    /// Kind-specific size; see [`InjectionSpec::magnitude`].
    pub magnitude: f64,
}

/// Everything injected into a month, written out as `labels.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub injections: Vec<InjectedAnomaly>,
}

/// A requested injection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub day: NaiveDate,
    pub kind: AnomalyType,
    /// `AuthBurst`: extra failures. `DnsAnomaly`: DNS multiplier of the
    /// cohort. `SimultaneousConnections`: overlapping sessions.
    /// `DuplicateDevice`: APs used at once. `TrafficSpike`: gigabytes moved.
    pub magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct SimMonth {
    pub records: Vec<SimRecord>,
    pub truth: GroundTruth,
}

/// How device identities are written.
#[derive(Clone, Copy)]
pub enum DeviceOutput<'a> {
    Mac,
    Anonymized(&'a Salt),
}

impl SimMonth {
    /// Records as ingest would produce them from the MAC output.
    pub fn session_records(&self, salt: &Salt) -> Vec<SessionRecord> {
        let mut ids = DeviceCache::new(salt);
        self.records
            .iter()
            .map(|r| r.with_device(ids.get(r.mac)))
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W, devices: DeviceOutput<'_>) -> io::Result<()> {
        let mut ids = match devices {
            DeviceOutput::Mac => None,
            DeviceOutput::Anonymized(salt) => Some(DeviceCache::new(salt)),
        };
        for r in &self.records {
            let raw = match ids.as_mut() {
                None => r.to_raw(),
                Some(ids) => r.with_device(ids.get(r.mac)).to_raw(),
            };
            serde_json::to_writer(&mut out, &raw)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

struct DeviceCache<'a> {
    salt: &'a Salt,
    ids: HashMap<MacAddr, DeviceId>,
}

impl<'a> DeviceCache<'a> {
    fn new(salt: &'a Salt) -> Self {
        DeviceCache {
            salt,
            ids: HashMap::new(),
        }
    }

    fn get(&mut self, mac: MacAddr) -> DeviceId {
        *self.ids.entry(mac).or_insert_with(|| {
            anonymize_device(&mac.to_string(), self.salt).expect("simulator MACs are well formed")
        })
    }
}

const AP_STREAM: u64 = 1 << 32;
const PLAN_STREAM: u64 = 2 << 32;
const INJECT_STREAM: u64 = 3 << 32;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct Model<'a> {
    cfg: &'a SimConfig,
    seed: u64,
    aps: Vec<ApId>,
    ap_pick: WeightedIndex<f64>,
    proto_pick: WeightedIndex<f64>,
    session_len: LogNormal<f64>,
    bytes: LogNormal<f64>,
    peak: Normal<f64>,
    base_latency: Vec<f64>,
    base_loss: Vec<f64>,
}

impl<'a> Model<'a> {
    fn new(cfg: &'a SimConfig, seed: u64) -> Result<Self, SimError> {
        let aps = cfg.ap_ids();
        let ap_pick = WeightedIndex::new(cfg.ap_weights()).map_err(|e| invalid(e.to_string()))?;
        let proto_pick = WeightedIndex::new(cfg.proto_mix.weights().map(|(_, w)| w))
            .map_err(|e| invalid(e.to_string()))?;
        let session_len = LogNormal::new(cfg.session_median_minutes.ln(), cfg.session_sigma)
            .map_err(|e| invalid(e.to_string()))?;
        let mean_bytes = cfg.bytes_per_session_mb * 1e6;
        let bytes = LogNormal::new(
            mean_bytes.ln() - cfg.bytes_sigma.powi(2) / 2.0,
            cfg.bytes_sigma,
        )
        .map_err(|e| invalid(e.to_string()))?;
        let peak = Normal::new(cfg.peak_hour, cfg.peak_spread_hours)
            .map_err(|e| invalid(e.to_string()))?;
        let mut rng = stream(seed, AP_STREAM);
        let base_latency = (0..aps.len())
            .map(|_| rng.random_range(25.0..38.0))
            .collect();
        let base_loss = (0..aps.len()).map(|_| rng.random_range(0.5..1.8)).collect();
        Ok(Model {
            cfg,
            seed,
            aps,
            ap_pick,
            proto_pick,
            session_len,
            bytes,
            peak,
            base_latency,
            base_loss,
        })
    }

    /// Seconds after local midnight at which a session starts.
    fn start_second(&self, rng: &mut ChaCha8Rng) -> i64 {
        let hour = if rng.random::<f64>() < self.cfg.background_share {
            rng.random_range(7.0..21.0)
        } else {
            loop {
                let h = self.peak.sample(rng);
                if (6.5..22.5).contains(&h) {
                    break h;
                }
            }
        };
        (hour * 3600.0) as i64
    }

    fn connections(&self, day: NaiveDate, rng: &mut ChaCha8Rng) -> usize {
        let base = if is_weekend(day) {
            self.cfg.weekend_connections
        } else {
            self.cfg.weekday_connections
        };
        let s = self.cfg.day_noise_sigma;
        let z = loop {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            if z.abs() <= 2.5 {
                break z;
            }
        };
        (base * (s * z - s * s / 2.0).exp()).round() as usize
    }

    /// Traffic samples of one session, spread over its lifetime.
    fn traffic(
        &self,
        rng: &mut ChaCha8Rng,
        mac: MacAddr,
        ap: &ApId,
        start: DateTime<Utc>,
        secs: i64,
        out: &mut Vec<SimRecord>,
    ) {
        let total = self.bytes.sample(rng);
        let parts = rng.random_range(1..=3usize);
        let cuts: Vec<f64> = (0..parts)
            .map(|_| -rng.random::<f64>().max(1e-12).ln())
            .collect();
        let norm: f64 = cuts.iter().sum();
        for c in cuts {
            let b = (total * c / norm).round() as u64;
            let up = b * 3 / 20;
            out.push(SimRecord {
                ts: start + Duration::seconds(rng.random_range(1..=secs)),
                mac,
                ap: ap.clone(),
                event: Event::Traffic {
                    bytes_up: up,
                    bytes_down: b - up,
                    proto: self.cfg.proto_mix.weights()[self.proto_pick.sample(rng)].0,
                },
            });
        }
    }

    fn day(&self, index: usize) -> Vec<SimRecord> {
        let day = self.cfg.day(index);
        let midnight = local_midnight(day);
        let mut rng = stream(self.seed, index as u64);
        let n = self.connections(day, &mut rng);

        let mut sessions: Vec<(i64, i64, usize)> = (0..n)
            .map(|_| {
                let start = self.start_second(&mut rng);
                let minutes = self.session_len.sample(&mut rng).clamp(1.0, 1440.0);
                let secs = ((minutes * 60.0).round() as i64).max(60);
                (start, secs, self.ap_pick.sample(&mut rng))
            })
            .collect();
        sessions.sort();

        let mut busy_until: HashMap<usize, i64> = HashMap::new();
        let mut out = Vec::with_capacity(n * 5);
        let mut sweeps: Vec<Vec<(i64, i8)>> = vec![Vec::new(); self.aps.len()];
        for (start, secs, ap_i) in sessions {
            let device = loop {
                let d = rng.random_range(0..self.cfg.device_pool);
                if busy_until.get(&d).is_none_or(|&end| end <= start) {
                    busy_until.insert(d, start + secs);
                    break d;
                }
            };
            let mac = device_mac(self.seed, device);
            let ap = &self.aps[ap_i];
            let t0 = midnight + Duration::seconds(start);
            out.push(SimRecord {
                ts: t0,
                mac,
                ap: ap.clone(),
                event: Event::Assoc,
            });
            out.push(SimRecord {
                ts: t0 + Duration::seconds(secs),
                mac,
                ap: ap.clone(),
                event: Event::Disassoc {
                    session_minutes: secs as f64 / 60.0,
                },
            });
            self.traffic(&mut rng, mac, ap, t0, secs, &mut out);
            sweeps[ap_i].extend([(start, 1), (start + secs, -1)]);
        }

        let failures = Poisson::new(self.cfg.auth_fail_mean)
            .expect("positive rate")
            .sample(&mut rng) as usize;
        for _ in 0..failures {
            let t = midnight + Duration::seconds(self.start_second(&mut rng));
            let mac = device_mac(self.seed, rng.random_range(0..self.cfg.device_pool));
            let ap = self.aps[self.ap_pick.sample(&mut rng)].clone();
            out.push(SimRecord {
                ts: t,
                mac,
                ap,
                event: Event::AuthFail,
            });
        }

        let jitter = Normal::new(0.0, 1.0).expect("unit normal");
        for (i, sweep) in sweeps.iter_mut().enumerate() {
            let peak = crate::descriptive::peak_concurrency(sweep) as f64;
            let load = (peak / self.cfg.overload_threshold as f64).min(1.5);
            let latency = (self.base_latency[i]
                + self.cfg.load_latency_ms * load
                + 1.5 * jitter.sample(&mut rng))
            .max(1.0);
            let overloaded = if peak > self.cfg.overload_threshold as f64 {
                0.25
            } else {
                0.0
            };
            let loss =
                (self.base_loss[i] + overloaded + 0.1 * jitter.sample(&mut rng)).clamp(0.0, 100.0);
            out.push(SimRecord {
                ts: midnight + Duration::hours(23) + Duration::minutes(30),
                mac: device_mac(self.seed, self.cfg.device_pool + self.cfg.offender_pool + i),
                ap: self.aps[i].clone(),
                event: Event::ApHealth {
                    latency_ms: round_to(latency, 2),
                    loss_pct: round_to(loss, 3),
                },
            });
        }
        out
    }
}

fn round_to(v: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (v * f).round() / f
}

/// Draws the injection plan: per day a Poisson count clipped to
/// `[anomaly_min, anomaly_max]`, types by weight, magnitudes per type.
pub fn plan_injections(cfg: &SimConfig, seed: u64) -> Vec<InjectionSpec> {
    if cfg.anomaly_rate <= 0.0 {
        return Vec::new();
    }
    let table = cfg.injection_weights.table();
    let pick = WeightedIndex::new(table.map(|(_, w)| w)).expect("validated weights");
    let poisson = Poisson::new(cfg.anomaly_rate).expect("positive rate");
    let mut rng = stream(seed, PLAN_STREAM);
    let mut out = Vec::new();
    for d in 0..cfg.days {
        let day = cfg.day(d);
        let n = (poisson.sample(&mut rng) as u32).clamp(cfg.anomaly_min, cfg.anomaly_max);
        for _ in 0..n {
            let kind = table[pick.sample(&mut rng)].0;
            let magnitude = match kind {
                AnomalyType::AuthBurst => {
                    let m: f64 = rng.random_range(5.0..=20.0);
                    ((m - 1.0) * cfg.auth_fail_mean / 24.0).round()
                }
                AnomalyType::DnsAnomaly => rng.random_range(3.0..=8.0),
                AnomalyType::SimultaneousConnections => rng.random_range(4..=6) as f64,
                AnomalyType::DuplicateDevice => 2.0,
                AnomalyType::TrafficSpike => rng.random_range(20.0..=60.0),
                AnomalyType::ApOverload | AnomalyType::MultivariateOutlier => {
                    unreachable!("not injected")
                }
            };
            out.push(InjectionSpec {
                day,
                kind,
                magnitude,
            });
        }
    }
    out
}

/// Superimposes `specs` on `records`: original records are kept as they are
/// and the injected ones are merged in time order. Offender devices are
/// distinct within a day.
pub fn inject_anomalies(
    mut records: Vec<SimRecord>,
    specs: &[InjectionSpec],
    cfg: &SimConfig,
    seed: u64,
    salt: &Salt,
) -> Result<(Vec<SimRecord>, GroundTruth), SimError> {
    cfg.validate()?;
    let model = Model::new(cfg, seed)?;
    let mut ids = DeviceCache::new(salt);
    let mut by_day: BTreeMap<NaiveDate, Vec<&InjectionSpec>> = BTreeMap::new();
    for s in specs {
        by_day.entry(s.day).or_default().push(s);
    }

    let mut added = Vec::new();
    let mut truth = GroundTruth::default();
    for (day, day_specs) in by_day {
        let day_index = (day - cfg.start).num_days().max(0) as u64;
        let mut rng = stream(seed, INJECT_STREAM + day_index);
        let mut offenders: Vec<usize> = (0..cfg.offender_pool).collect();
        offenders.shuffle(&mut rng);
        let mut offenders = offenders
            .into_iter()
            .map(|i| device_mac(seed, cfg.device_pool + i));
        let midnight = local_midnight(day);
        let mut next_offender = || {
            offenders
                .next()
                .ok_or_else(|| invalid("more injections in a day than offenders"))
        };

        for spec in day_specs {
            let mut devices = Vec::new();
            let mut aps = Vec::new();
            match spec.kind {
                AnomalyType::AuthBurst => {
                    let attackers: Vec<MacAddr> = (0..rng.random_range(1..=3))
                        .map(|_| next_offender())
                        .collect::<Result<_, _>>()?;
                    let ap = model.aps[model.ap_pick.sample(&mut rng)].clone();
                    let hour = rng.random_range(8..18i64);
                    for i in 0..spec.magnitude.max(0.0) as usize {
                        added.push(SimRecord {
                            ts: midnight
                                + Duration::seconds(hour * 3600 + rng.random_range(0..3600)),
                            mac: attackers[i % attackers.len()],
                            ap: ap.clone(),
                            event: Event::AuthFail,
                        });
                    }
                    devices.extend(attackers);
                    aps.push(ap);
                }
                AnomalyType::DnsAnomaly => {
                    let mut usage: BTreeMap<MacAddr, (u64, DateTime<Utc>, ApId)> = BTreeMap::new();
                    for r in records.iter().filter(|r| r.local_date() == day) {
                        if let Event::Traffic {
                            bytes_up,
                            bytes_down,
                            ..
                        } = r.event
                        {
                            let e = usage.entry(r.mac).or_insert((0, r.ts, r.ap.clone()));
                            e.0 += bytes_up + bytes_down;
                            if r.ts >= e.1 {
                                e.1 = r.ts;
                                e.2 = r.ap.clone();
                            }
                        }
                    }
                    let users: Vec<_> = usage.into_iter().collect();
                    let share: f64 = rng.random_range(0.15..=0.25);
                    let n = ((users.len() as f64 * share).round() as usize).min(users.len());
                    let mut cohort = index::sample(&mut rng, users.len(), n).into_vec();
                    cohort.sort_unstable();
                    for i in cohort {
                        let (mac, (bytes, ts, ap)) = &users[i];
                        let extra = ((spec.magnitude - 1.0) * cfg.proto_mix.dns * *bytes as f64)
                            .round() as u64;
                        let up = extra * 3 / 10;
                        added.push(SimRecord {
                            ts: *ts,
                            mac: *mac,
                            ap: ap.clone(),
                            event: Event::Traffic {
                                bytes_up: up,
                                bytes_down: extra - up,
                                proto: Protocol::Dns,
                            },
                        });
                        devices.push(*mac);
                    }
                }
                AnomalyType::SimultaneousConnections => {
                    let mac = next_offender()?;
                    let ap = model.aps[model.ap_pick.sample(&mut rng)].clone();
                    let base = rng.random_range(9 * 3600..16 * 3600i64);
                    let mut start = base;
                    for _ in 0..spec.magnitude as usize {
                        let secs = rng.random_range(30 * 60..=60 * 60i64);
                        push_session(
                            &model,
                            &mut rng,
                            &mut added,
                            mac,
                            &ap,
                            midnight + Duration::seconds(start),
                            secs,
                        );
                        start += rng.random_range(60..=300);
                    }
                    devices.push(mac);
                    aps.push(ap);
                }
                AnomalyType::DuplicateDevice => {
                    let mac = next_offender()?;
                    let first = model.ap_pick.sample(&mut rng);
                    let second = loop {
                        let i = model.ap_pick.sample(&mut rng);
                        if i != first {
                            break i;
                        }
                    };
                    let base = rng.random_range(8 * 3600..18 * 3600i64);
                    for (k, ap_i) in [first, second].into_iter().enumerate() {
                        let start = base + k as i64 * rng.random_range(5 * 60..=20 * 60i64);
                        let secs = rng.random_range(40 * 60..=80 * 60i64);
                        push_session(
                            &model,
                            &mut rng,
                            &mut added,
                            mac,
                            &model.aps[ap_i],
                            midnight + Duration::seconds(start),
                            secs,
                        );
                        aps.push(model.aps[ap_i].clone());
                    }
                    devices.push(mac);
                }
                AnomalyType::TrafficSpike => {
                    let mac = next_offender()?;
                    let ap = model.aps[model.ap_pick.sample(&mut rng)].clone();
                    let start =
                        midnight + Duration::seconds(rng.random_range(9 * 3600..15 * 3600i64));
                    let secs = rng.random_range(90 * 60..=180 * 60i64);
                    push_session(&model, &mut rng, &mut added, mac, &ap, start, secs);
                    let total = spec.magnitude * BYTES_PER_GB;
                    for part in 0..4 {
                        let b = (total / 4.0).round() as u64;
                        let up = b / 10;
                        added.push(SimRecord {
                            ts: start + Duration::seconds(secs * (part + 1) / 5),
                            mac,
                            ap: ap.clone(),
                            event: Event::Traffic {
                                bytes_up: up,
                                bytes_down: b - up,
                                proto: [Protocol::Udp, Protocol::Other, Protocol::Https]
                                    [rng.random_range(0..3)],
                            },
                        });
                    }
                    devices.push(mac);
                    aps.push(ap);
                }
                AnomalyType::ApOverload | AnomalyType::MultivariateOutlier => {
                    return Err(invalid(format!("{} cannot be injected", spec.kind)));
                }
            }
            let mut devices: Vec<DeviceId> = devices.into_iter().map(|m| ids.get(m)).collect();
            devices.sort();
            devices.dedup();
            truth.injections.push(InjectedAnomaly {
                day,
                kind: spec.kind,
                devices,
                aps,
                magnitude: spec.magnitude,
            });
        }
    }

    records.extend(added);
    records.sort_by_key(|r| r.ts);
    Ok((records, truth))
}

fn push_session(
    model: &Model<'_>,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<SimRecord>,
    mac: MacAddr,
    ap: &ApId,
    start: DateTime<Utc>,
    secs: i64,
) {
    out.push(SimRecord {
        ts: start,
        mac,
        ap: ap.clone(),
        event: Event::Assoc,
    });
    out.push(SimRecord {
        ts: start + Duration::seconds(secs),
        mac,
        ap: ap.clone(),
        event: Event::Disassoc {
            session_minutes: secs as f64 / 60.0,
        },
    });
    model.traffic(rng, mac, ap, start, secs, out);
}

/// Generates `cfg.days` days of traffic and injects the planned anomalies.
/// The same `(cfg, seed, salt)` always yields the same month.
pub fn generate_month(cfg: &SimConfig, seed: u64, salt: &Salt) -> Result<SimMonth, SimError> {
    cfg.validate()?;
    let model = Model::new(cfg, seed)?;
    let days: Vec<Vec<SimRecord>> = (0..cfg.days)
        .into_par_iter()
        .map(|d| model.day(d))
        .collect();
    let mut records: Vec<SimRecord> = days.into_iter().flatten().collect();
    records.sort_by_key(|r| r.ts);
    let specs = plan_injections(cfg, seed);
    let (records, truth) = inject_anomalies(records, &specs, cfg, seed, salt)?;
    Ok(SimMonth { records, truth })
}

/// Short human summary used by the CLI.
pub fn describe(month: &SimMonth) -> String {
    let first = month
        .records
        .first()
        .map(|r| r.ts.to_rfc3339_opts(SecondsFormat::Secs, true));
    let last = month
        .records
        .last()
        .map(|r| r.ts.to_rfc3339_opts(SecondsFormat::Secs, true));
    let mut per_type: BTreeMap<&str, usize> = BTreeMap::new();
    for i in &month.truth.injections {
        *per_type.entry(i.kind.name()).or_default() += 1;
    }
    format!(
        "{} records from {} to {}; injected {:?}",
        month.records.len(),
        first.unwrap_or_default(),
        last.unwrap_or_default(),
        per_type
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Datelike;

    fn salt() -> Salt {
        Salt::from_bytes([7; 16])
    }

    fn small() -> SimConfig {
        SimConfig {
            days: 7,
            weekday_connections: 600.0,
            weekend_connections: 400.0,
            auth_fail_mean: 20.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid_and_weights_sum_to_one() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.start.weekday(), chrono::Weekday::Mon);
        let w = cfg.ap_weights();
        assert_eq!(w.len(), 85);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((w[4] - 15_240.0 / 174_000.0).abs() < 1e-15);
    }

    #[test]
    fn overrides_apply_and_reject_unknown_keys() {
        let mut cfg = SimConfig::default();
        cfg.apply_overrides("# comment\ndays = 14\nproto_mix.dns=0.05\nstart=2025-05-05\n")
            .unwrap();
        assert_eq!(cfg.days, 14);
        assert_eq!(cfg.start, NaiveDate::from_ymd_opt(2025, 5, 5).unwrap());
        assert!(cfg.clone().apply_overrides("nope=1").is_err());
        assert!(cfg.clone().apply_overrides("days=3").is_err());
        assert!(cfg.apply_overrides("proto_mix.dns=0.5").is_err());
    }

    #[test]
    fn macs_are_locally_administered_and_distinct() {
        let a = device_mac(42, 0);
        assert_eq!(a.0[0], 0x02);
        assert_ne!(device_mac(42, 1), a);
        assert_eq!(a.to_string().len(), 17);
    }

    #[test]
    fn same_seed_same_month() {
        let a = generate_month(&small(), 5, &salt()).unwrap();
        let b = generate_month(&small(), 5, &salt()).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.truth, b.truth);
        let c = generate_month(&small(), 6, &salt()).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn sessions_pair_up_and_never_overlap_per_device() {
        let cfg = SimConfig {
            anomaly_rate: 0.0,
            ..small()
        };
        let m = generate_month(&cfg, 1, &salt()).unwrap();
        assert!(m.truth.injections.is_empty());
        let mut open: HashMap<MacAddr, DateTime<Utc>> = HashMap::new();
        let mut assoc = 0;
        for r in &m.records {
            match r.event {
                Event::Assoc => {
                    assoc += 1;
                    assert!(
                        open.insert(r.mac, r.ts).is_none(),
                        "device already in a session"
                    );
                }
                Event::Disassoc { session_minutes } => {
                    let start = open.remove(&r.mac).expect("matching assoc");
                    assert!(session_minutes <= 1440.0);
                    assert_eq!(
                        (r.ts - start).num_seconds(),
                        (session_minutes * 60.0).round() as i64
                    );
                }
                _ => {}
            }
        }
        assert!(open.is_empty());
        assert!(assoc > 0);
    }

    #[test]
    fn empty_plan_is_identity() {
        let cfg = small();
        let m = generate_month(
            &SimConfig {
                anomaly_rate: 0.0,
                ..cfg.clone()
            },
            3,
            &salt(),
        )
        .unwrap();
        let (out, truth) = inject_anomalies(m.records.clone(), &[], &cfg, 3, &salt()).unwrap();
        assert_eq!(out, m.records);
        assert!(truth.injections.is_empty());
    }

    #[test]
    fn auth_burst_adds_exactly_its_size() {
        let cfg = SimConfig {
            anomaly_rate: 0.0,
            ..small()
        };
        let m = generate_month(&cfg, 3, &salt()).unwrap();
        let day = cfg.day(5);
        let fails = |rs: &[SimRecord]| {
            rs.iter()
                .filter(|r| r.event == Event::AuthFail && r.local_date() == day)
                .count()
        };
        let spec = [
            InjectionSpec {
                day,
                kind: AnomalyType::AuthBurst,
                magnitude: 300.0,
            },
            InjectionSpec {
                day,
                kind: AnomalyType::DuplicateDevice,
                magnitude: 2.0,
            },
        ];
        let (out, truth) = inject_anomalies(m.records.clone(), &spec, &cfg, 3, &salt()).unwrap();
        assert_eq!(fails(&out), fails(&m.records) + 300);
        assert_eq!(truth.injections.len(), 2);
        let offenders: Vec<_> = truth
            .injections
            .iter()
            .flat_map(|i| i.devices.clone())
            .collect();
        let mut uniq = offenders.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), offenders.len());
    }

    #[test]
    fn truth_ids_match_ingest_anonymization() {
        let cfg = small();
        let m = generate_month(&cfg, 11, &salt()).unwrap();
        let recs = m.session_records(&salt());
        let mut buf = Vec::new();
        m.write_jsonl(&mut buf, DeviceOutput::Mac).unwrap();
        let opts = crate::ingest::IngestOptions::default();
        let (ingested, stats) =
            crate::ingest::ingest_reader(&buf[..], Some(&salt()), &opts).unwrap();
        assert_eq!(stats.skipped, 0);
        assert_eq!(ingested, recs);
    }
}
