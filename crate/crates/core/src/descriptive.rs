//! Descriptive analytics: daily and hourly aggregation, per-AP load
//! statistics, the weekday baseline and the users/traffic correlation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    local_date, local_midnight, weekday_slot, ApId, BaselineProfile, DailyAggregate, DeviceId,
    Event, EventKind, Metric, MetricStats, Protocol, SessionRecord, SlotProfile, BYTES_PER_GB,
};
use crate::stats::{canonical_sum, mean_std};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescriptiveError {
    #[error("insufficient data: {have} days, need at least {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("series is constant; correlation undefined")]
    ZeroVariance,
    #[error("correlation needs two series of equal length >= 3 (got {0} and {1})")]
    BadSeries(usize, usize),
}

/// Minimum number of days to fit a baseline, and per weekday slot before the
/// slot falls back to all-days statistics.
pub const MIN_BASELINE_DAYS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateConfig {
    /// An AP is overloaded when its peak concurrent client count exceeds this.
    pub overload_threshold: u32,
    /// A disassociation shorter than this many minutes counts as unexpected.
    pub unexpected_disconnect_minutes: f64,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig {
            overload_threshold: 50,
            unexpected_disconnect_minutes: 1.0,
        }
    }
}

/// A session interval reconstructed from a disassociation record:
/// `[end - session_minutes, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionInterval {
    pub device: DeviceId,
    pub ap: ApId,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl SessionInterval {
    pub fn from_record(r: &SessionRecord) -> Option<Self> {
        match r.event {
            Event::Disassoc { session_minutes } => {
                let secs = (session_minutes * 60.0).round() as i64;
                Some(SessionInterval {
                    device: r.device,
                    ap: r.ap.clone(),
                    start: r.ts - Duration::seconds(secs),
                    end: r.ts,
                })
            }
            _ => None,
        }
    }

    pub fn overlaps(&self, other: &SessionInterval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

pub fn session_intervals(records: &[SessionRecord]) -> Vec<SessionInterval> {
    records
        .iter()
        .filter_map(SessionInterval::from_record)
        .collect()
}

/// Peak of a +1/-1 sweep. At equal instants departures are applied before
/// arrivals, and the running count never drops below zero (a departure whose
/// arrival predates the window is ignored).
pub fn peak_concurrency(events: &mut [(i64, i8)]) -> u64 {
    events.sort_unstable();
    let mut current: i64 = 0;
    let mut peak: i64 = 0;
    for &(_, delta) in events.iter() {
        current = (current + delta as i64).max(0);
        peak = peak.max(current);
    }
    peak as u64
}

fn sweep_delta(r: &SessionRecord) -> Option<(i64, i8)> {
    match r.event {
        Event::Assoc => Some((r.ts.timestamp(), 1)),
        Event::Disassoc { .. } => Some((r.ts.timestamp(), -1)),
        _ => None,
    }
}

/// Mergeable partial aggregate of one day. Any partition of a day's records
/// accumulated separately and merged finishes to the same [`DailyAggregate`]
/// as accumulating them all at once.
#[derive(Debug, Clone)]
pub struct DayAccumulator {
    day: NaiveDate,
    connections: u64,
    devices: HashSet<DeviceId>,
    session_minutes: Vec<f64>,
    auth_failures: u64,
    unexpected_disconnects: u64,
    bytes: [u64; 5],
    ap_sweeps: HashMap<ApId, Vec<(i64, i8)>>,
    intervals: Vec<(DeviceId, i64, i64)>,
}

fn proto_index(p: Protocol) -> usize {
    Protocol::ALL
        .iter()
        .position(|q| *q == p)
        .expect("protocol listed")
}

impl DayAccumulator {
    pub fn new(day: NaiveDate) -> Self {
        DayAccumulator {
            day,
            connections: 0,
            devices: HashSet::new(),
            session_minutes: Vec::new(),
            auth_failures: 0,
            unexpected_disconnects: 0,
            bytes: [0; 5],
            ap_sweeps: HashMap::new(),
            intervals: Vec::new(),
        }
    }

    pub fn day(&self) -> NaiveDate {
        self.day
    }

    /// Adds one record; the caller guarantees it belongs to this day.
    pub fn push(&mut self, r: &SessionRecord, cfg: &AggregateConfig) {
        self.devices.insert(r.device);
        let sweep = self.ap_sweeps.entry(r.ap.clone()).or_default();
        if let Some(d) = sweep_delta(r) {
            sweep.push(d);
        }
        match r.event {
            Event::Assoc => self.connections += 1,
            Event::Disassoc { session_minutes } => {
                self.session_minutes.push(session_minutes);
                if session_minutes < cfg.unexpected_disconnect_minutes {
                    self.unexpected_disconnects += 1;
                }
                let end = r.ts.timestamp();
                let start = end - (session_minutes * 60.0).round() as i64;
                self.intervals.push((r.device, start, end));
            }
            Event::AuthFail => self.auth_failures += 1,
            Event::Traffic {
                bytes_up,
                bytes_down,
                proto,
            } => self.bytes[proto_index(proto)] += bytes_up + bytes_down,
            Event::ApHealth { .. } => {}
        }
    }

    pub fn merge(mut self, other: DayAccumulator) -> DayAccumulator {
        assert_eq!(
            self.day, other.day,
            "merging accumulators of different days"
        );
        self.connections += other.connections;
        self.devices.extend(other.devices);
        self.session_minutes.extend(other.session_minutes);
        self.auth_failures += other.auth_failures;
        self.unexpected_disconnects += other.unexpected_disconnects;
        for (a, b) in self.bytes.iter_mut().zip(other.bytes) {
            *a += b;
        }
        for (ap, events) in other.ap_sweeps {
            self.ap_sweeps.entry(ap).or_default().extend(events);
        }
        self.intervals.extend(other.intervals);
        self
    }

    pub fn finish(mut self, cfg: &AggregateConfig) -> DailyAggregate {
        let n_sessions = self.session_minutes.len();
        let mean_session_minutes = if n_sessions == 0 {
            0.0
        } else {
            canonical_sum(&mut self.session_minutes) / n_sessions as f64
        };

        let total_bytes: u64 = self.bytes.iter().sum();
        let proto_share = Protocol::ALL
            .iter()
            .map(|&p| {
                let share = if total_bytes == 0 {
                    0.0
                } else {
                    self.bytes[proto_index(p)] as f64 / total_bytes as f64
                };
                (p, share)
            })
            .collect();

        let n_aps = self.ap_sweeps.len();
        let overloaded = self
            .ap_sweeps
            .values_mut()
            .map(|ev| peak_concurrency(ev))
            .filter(|&peak| peak > cfg.overload_threshold as u64)
            .count();
        let overload_pct = if n_aps == 0 {
            0.0
        } else {
            100.0 * overloaded as f64 / n_aps as f64
        };

        DailyAggregate {
            day: self.day,
            connections: self.connections,
            distinct_devices: self.devices.len() as u64,
            mean_session_minutes,
            auth_failures: self.auth_failures,
            unexpected_disconnects: self.unexpected_disconnects,
            traffic_gb: total_bytes as f64 / BYTES_PER_GB,
            overload_pct,
            proto_share,
            duplicate_device_events: devices_with_overlaps(&mut self.intervals),
        }
    }
}

/// Number of devices holding at least two overlapping sessions.
fn devices_with_overlaps(intervals: &mut [(DeviceId, i64, i64)]) -> u64 {
    intervals.sort_unstable();
    let mut count = 0;
    let mut i = 0;
    while i < intervals.len() {
        let dev = intervals[i].0;
        let mut j = i;
        let mut max_end = i64::MIN;
        let mut overlapped = false;
        while j < intervals.len() && intervals[j].0 == dev {
            let (_, start, end) = intervals[j];
            if start < max_end {
                overlapped = true;
            }
            max_end = max_end.max(end);
            j += 1;
        }
        if overlapped {
            count += 1;
        }
        i = j;
    }
    count
}

/// Aggregate of the records falling on local day `day` (others are ignored).
pub fn aggregate_daily(
    records: &[SessionRecord],
    day: NaiveDate,
    cfg: &AggregateConfig,
) -> DailyAggregate {
    let mut acc = DayAccumulator::new(day);
    for r in records.iter().filter(|r| r.local_date() == day) {
        acc.push(r, cfg);
    }
    acc.finish(cfg)
}

/// Every local day from the first to the last record, inclusive.
pub fn days_covered(records: &[SessionRecord]) -> Vec<NaiveDate> {
    let (Some(first), Some(last)) = (
        records.iter().map(|r| r.ts).min(),
        records.iter().map(|r| r.ts).max(),
    ) else {
        return Vec::new();
    };
    local_date(first)
        .iter_days()
        .take_while(|d| *d <= local_date(last))
        .collect()
}

const CHUNK: usize = 1 << 16;

/// Aggregates of every covered day, computed in parallel. Records are split
/// into fixed-size chunks and the partial results merged in chunk order, so
/// the output does not depend on the thread count.
pub fn aggregate_all(records: &[SessionRecord], cfg: &AggregateConfig) -> Vec<DailyAggregate> {
    let partials: Vec<BTreeMap<NaiveDate, DayAccumulator>> = records
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut map: BTreeMap<NaiveDate, DayAccumulator> = BTreeMap::new();
            for r in chunk {
                let day = r.local_date();
                map.entry(day)
                    .or_insert_with(|| DayAccumulator::new(day))
                    .push(r, cfg);
            }
            map
        })
        .collect();
    let mut merged: BTreeMap<NaiveDate, DayAccumulator> = BTreeMap::new();
    for part in partials {
        for (day, acc) in part {
            let entry = match merged.remove(&day) {
                Some(prev) => prev.merge(acc),
                None => acc,
            };
            merged.insert(day, entry);
        }
    }
    let days = days_covered(records);
    let accs: Vec<DayAccumulator> = days
        .iter()
        .map(|d| merged.remove(d).unwrap_or_else(|| DayAccumulator::new(*d)))
        .collect();
    accs.into_par_iter().map(|a| a.finish(cfg)).collect()
}

/// Per-AP load and health over a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApStats {
    pub ap: ApId,
    pub monthly_connections: u64,
    pub peak_concurrent: u64,
    /// Absent when the AP reported no health samples.
    pub mean_latency_ms: Option<f64>,
    pub mean_loss_pct: Option<f64>,
    /// Days on which the AP's peak exceeded the overload threshold.
    pub overloaded_days: u64,
}

#[derive(Default)]
struct ApAcc {
    connections: u64,
    sweep: Vec<(i64, i8)>,
    per_day: BTreeMap<NaiveDate, Vec<(i64, i8)>>,
    latency_sum: f64,
    loss_sum: f64,
    health_n: u64,
}

/// Per-AP statistics over `window` (all records when `None`), sorted by AP id.
pub fn ap_load_stats(
    records: &[SessionRecord],
    window: Option<&crate::domain::ObservationWindow>,
    overload_threshold: u32,
) -> Vec<ApStats> {
    let mut accs: BTreeMap<ApId, ApAcc> = BTreeMap::new();
    for r in records {
        if window.is_some_and(|w| !w.contains(r.ts)) {
            continue;
        }
        let acc = accs.entry(r.ap.clone()).or_default();
        if let Some(d) = sweep_delta(r) {
            acc.sweep.push(d);
            acc.per_day.entry(r.local_date()).or_default().push(d);
        }
        match r.event {
            Event::Assoc => acc.connections += 1,
            Event::ApHealth {
                latency_ms,
                loss_pct,
            } => {
                acc.latency_sum += latency_ms;
                acc.loss_sum += loss_pct;
                acc.health_n += 1;
            }
            _ => {}
        }
    }
    accs.into_iter()
        .map(|(ap, mut acc)| {
            let overloaded_days = acc
                .per_day
                .values_mut()
                .map(|ev| peak_concurrency(ev))
                .filter(|&peak| peak > overload_threshold as u64)
                .count() as u64;
            let (mean_latency_ms, mean_loss_pct) = if acc.health_n == 0 {
                (None, None)
            } else {
                let n = acc.health_n as f64;
                (Some(acc.latency_sum / n), Some(acc.loss_sum / n))
            };
            ApStats {
                ap,
                monthly_connections: acc.connections,
                peak_concurrent: peak_concurrency(&mut acc.sweep),
                mean_latency_ms,
                mean_loss_pct,
                overloaded_days,
            }
        })
        .collect()
}

/// Percentage of APs whose peak concurrency exceeds `threshold`; 0 when empty.
pub fn overload_fraction(stats: &[ApStats], threshold: u32) -> f64 {
    if stats.is_empty() {
        return 0.0;
    }
    let over = stats
        .iter()
        .filter(|s| s.peak_concurrent > threshold as u64)
        .count();
    100.0 * over as f64 / stats.len() as f64
}

/// Mean concurrent connections at the top of each local hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyProfile {
    pub buckets: [f64; 24],
}

impl HourlyProfile {
    pub fn peak_hour(&self) -> usize {
        let mut best = 0;
        for h in 1..24 {
            if self.buckets[h] > self.buckets[best] {
                best = h;
            }
        }
        best
    }
}

/// Bucket `h` is the mean, over the days present in `records`, of the number
/// of sessions open at local `h:00`.
pub fn hourly_profile(records: &[SessionRecord]) -> HourlyProfile {
    let days: BTreeSet<NaiveDate> = records.iter().map(|r| r.local_date()).collect();
    let mut counts: HashMap<(NaiveDate, u32), u64> = HashMap::new();
    for s in records.iter().filter_map(SessionInterval::from_record) {
        // first top-of-hour at or after start
        let start_local = s.start.with_timezone(&crate::domain::campus_offset());
        let mut t = local_midnight(start_local.date_naive())
            + Duration::hours(chrono::Timelike::hour(&start_local) as i64);
        if t < s.start {
            t += Duration::hours(1);
        }
        while t < s.end {
            let day = local_date(t);
            if days.contains(&day) {
                *counts
                    .entry((day, crate::domain::local_hour(t)))
                    .or_default() += 1;
            }
            t += Duration::hours(1);
        }
    }
    let mut buckets = [0.0; 24];
    if !days.is_empty() {
        let mut sums = [0u64; 24];
        for ((_, h), c) in counts {
            sums[h as usize] += c;
        }
        for h in 0..24 {
            buckets[h] = sums[h] as f64 / days.len() as f64;
        }
    }
    HourlyProfile { buckets }
}

/// Network-wide peak concurrency of each day (sessions from disassociation
/// records).
pub fn daily_peak_concurrency(records: &[SessionRecord]) -> BTreeMap<NaiveDate, u64> {
    let mut per_day: BTreeMap<NaiveDate, Vec<(i64, i8)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.kind() == EventKind::Disassoc) {
        let s = SessionInterval::from_record(r).expect("disassoc");
        let ev = per_day.entry(r.local_date()).or_default();
        ev.push((s.start.timestamp(), 1));
        ev.push((s.end.timestamp(), -1));
    }
    per_day
        .into_iter()
        .map(|(d, mut ev)| (d, peak_concurrency(&mut ev)))
        .collect()
}

/// Per weekday slot, per metric mean and sample deviation. Slots with fewer
/// than `min_slot_days` days use the all-days statistics and are flagged.
pub fn build_baseline(
    aggregates: &[DailyAggregate],
    min_slot_days: usize,
) -> Result<BaselineProfile, DescriptiveError> {
    if aggregates.len() < MIN_BASELINE_DAYS {
        return Err(DescriptiveError::InsufficientData {
            have: aggregates.len(),
            need: MIN_BASELINE_DAYS,
        });
    }
    let mut sorted: Vec<&DailyAggregate> = aggregates.iter().collect();
    sorted.sort_by_key(|a| a.day);

    let stats_of = |days: &[&DailyAggregate]| -> BTreeMap<Metric, MetricStats> {
        Metric::ALL
            .iter()
            .map(|&m| {
                let xs: Vec<f64> = days.iter().filter_map(|a| m.value(a)).collect();
                let (mean, std) = mean_std(&xs);
                (
                    m,
                    MetricStats {
                        mean,
                        std,
                        n: xs.len(),
                    },
                )
            })
            .collect()
    };

    let all = stats_of(&sorted);
    let slots = (0..7)
        .map(|w| {
            let days: Vec<&DailyAggregate> = sorted
                .iter()
                .copied()
                .filter(|a| weekday_slot(a.day) == w)
                .collect();
            let fallback = days.len() < min_slot_days.max(1);
            SlotProfile {
                weekday: w,
                days: days.len(),
                fallback,
                metrics: if fallback {
                    all.clone()
                } else {
                    stats_of(&days)
                },
            }
        })
        .collect();

    Ok(BaselineProfile {
        slots,
        window_days: sorted.len(),
        built_from: (sorted[0].day, sorted[sorted.len() - 1].day),
    })
}

/// Pearson correlation coefficient.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Result<f64, DescriptiveError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(DescriptiveError::BadSeries(xs.len(), ys.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(DescriptiveError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
