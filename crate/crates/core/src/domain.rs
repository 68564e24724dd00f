//! Shared vocabulary: validated record and result types used by every stage.
//!
//! Raw controller lines are first decoded into [`RawRecord`] (the wire shape,
//! every payload field optional) and then checked by [`validate`] into a
//! [`SessionRecord`], whose payload is carried by the [`Event`] enum so that a
//! field which does not apply to a kind simply cannot be present.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Campus local time is UTC-5 all year (no daylight saving). Day boundaries,
/// hour-of-day buckets and weekday slots are all taken in local time.
pub const CAMPUS_UTC_OFFSET_SECS: i32 = -5 * 3600;

/// Longest session a record may report.
pub const MAX_SESSION_MINUTES: f64 = 1440.0;

/// Bytes per gigabyte (decimal).
pub const BYTES_PER_GB: f64 = 1e9;

pub fn campus_offset() -> FixedOffset {
    FixedOffset::east_opt(CAMPUS_UTC_OFFSET_SECS).expect("valid offset")
}

pub fn local_date(ts: DateTime<Utc>) -> NaiveDate {
    ts.with_timezone(&campus_offset()).date_naive()
}

pub fn local_hour(ts: DateTime<Utc>) -> u32 {
    ts.with_timezone(&campus_offset()).hour()
}

/// UTC instant of local midnight opening `day`.
pub fn local_midnight(day: NaiveDate) -> DateTime<Utc> {
    day.and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_local_timezone(campus_offset())
        .single()
        .expect("fixed offset is unambiguous")
        .with_timezone(&Utc)
}

/// Monday = 0 .. Sunday = 6.
pub fn weekday_slot(day: NaiveDate) -> usize {
    day.weekday().num_days_from_monday() as usize
}

pub fn is_weekend(day: NaiveDate) -> bool {
    weekday_slot(day) >= 5
}

/// Failure of a record to meet the type invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("field `{field}` is missing")]
    FieldMissing { field: &'static str },
    #[error("field `{field}` out of range: {reason}")]
    FieldOutOfRange { field: &'static str, reason: String },
    #[error("unknown event kind `{0}`")]
    UnknownEventKind(String),
}

impl ValidationError {
    fn range(field: &'static str, reason: impl Into<String>) -> Self {
        ValidationError::FieldOutOfRange {
            field,
            reason: reason.into(),
        }
    }

    /// Short stable label used to bucket error counts.
    pub fn label(&self) -> String {
        match self {
            ValidationError::FieldMissing { field } => format!("missing:{field}"),
            ValidationError::FieldOutOfRange { field, .. } => format!("out_of_range:{field}"),
            ValidationError::UnknownEventKind(_) => "unknown_kind".to_string(),
        }
    }
}

/// Anonymized device identity: 16 opaque bytes shown as 32 lowercase hex chars.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeviceId([u8; 16]);

impl DeviceId {
    pub const fn from_bytes(bytes: [u8; 16]) -> Self {
        DeviceId(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl FromStr for DeviceId {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 32 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(ValidationError::range(
                "device",
                "expected 32 lowercase hex characters",
            ));
        }
        let mut out = [0u8; 16];
        hex::decode_to_slice(s, &mut out)
            .map_err(|e| ValidationError::range("device", e.to_string()))?;
        Ok(DeviceId(out))
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeviceId({self})")
    }
}

impl Serialize for DeviceId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DeviceId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Access point label, `AP-` followed by digits. Cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApId(Arc<str>);

impl ApId {
    pub fn new(label: &str) -> Result<Self, ValidationError> {
        let ok = label
            .strip_prefix("AP-")
            .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()));
        if !ok {
            return Err(ValidationError::range(
                "ap",
                format!("`{label}` does not match AP-<digits>"),
            ));
        }
        Ok(ApId(Arc::from(label)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ApId({})", self.0)
    }
}

impl Serialize for ApId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ApId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ApId::new(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Assoc,
    Disassoc,
    AuthFail,
    #[serde(rename = "traffic")]
    TrafficSample,
    ApHealth,
}

impl EventKind {
    pub fn wire_name(self) -> &'static str {
        match self {
            EventKind::Assoc => "assoc",
            EventKind::Disassoc => "disassoc",
            EventKind::AuthFail => "auth_fail",
            EventKind::TrafficSample => "traffic",
            EventKind::ApHealth => "ap_health",
        }
    }
}

impl FromStr for EventKind {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "assoc" => EventKind::Assoc,
            "disassoc" => EventKind::Disassoc,
            "auth_fail" => EventKind::AuthFail,
            "traffic" => EventKind::TrafficSample,
            "ap_health" => EventKind::ApHealth,
            other => return Err(ValidationError::UnknownEventKind(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Http,
    Https,
    Dns,
    Udp,
    Other,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Http,
        Protocol::Https,
        Protocol::Dns,
        Protocol::Udp,
        Protocol::Other,
    ];

    pub fn wire_name(self) -> &'static str {
        match self {
            Protocol::Http => "http",
            Protocol::Https => "https",
            Protocol::Dns => "dns",
            Protocol::Udp => "udp",
            Protocol::Other => "other",
        }
    }
}

impl FromStr for Protocol {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.wire_name() == s)
            .ok_or_else(|| ValidationError::range("proto", format!("unknown protocol `{s}`")))
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

/// Kind-specific payload of a record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Assoc,
    Disassoc {
        session_minutes: f64,
    },
    AuthFail,
    Traffic {
        bytes_up: u64,
        bytes_down: u64,
        proto: Protocol,
    },
    ApHealth {
        latency_ms: f64,
        loss_pct: f64,
    },
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self {
            Event::Assoc => EventKind::Assoc,
            Event::Disassoc { .. } => EventKind::Disassoc,
            Event::AuthFail => EventKind::AuthFail,
            Event::Traffic { .. } => EventKind::TrafficSample,
            Event::ApHealth { .. } => EventKind::ApHealth,
        }
    }
}

/// One validated controller event on one AP at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub ts: DateTime<Utc>,
    pub device: DeviceId,
    pub ap: ApId,
    pub event: Event,
}

impl SessionRecord {
    pub fn kind(&self) -> EventKind {
        self.event.kind()
    }

    pub fn local_date(&self) -> NaiveDate {
        local_date(self.ts)
    }

    pub fn to_raw(&self) -> RawRecord {
        let mut raw = RawRecord {
            ts: self.ts.to_rfc3339_opts(SecondsFormat::Secs, true),
            device: self.device.to_string(),
            ap: self.ap.to_string(),
            kind: self.kind().wire_name().to_string(),
            ..RawRecord::default()
        };
        match self.event {
            Event::Assoc | Event::AuthFail => {}
            Event::Disassoc { session_minutes } => raw.session_minutes = Some(session_minutes),
            Event::Traffic {
                bytes_up,
                bytes_down,
                proto,
            } => {
                raw.bytes_up = Some(bytes_up as i64);
                raw.bytes_down = Some(bytes_down as i64);
                raw.proto = Some(proto.wire_name().to_string());
            }
            Event::ApHealth {
                latency_ms,
                loss_pct,
            } => {
                raw.latency_ms = Some(latency_ms);
                raw.loss_pct = Some(loss_pct);
            }
        }
        raw
    }
}

/// Wire shape of one JSONL / CSV line before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub ts: String,
    pub device: String,
    pub ap: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_minutes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes_up: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes_down: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proto: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_pct: Option<f64>,
}

/// Half-open `[start, end)` interval of instants a dataset declares it covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl ObservationWindow {
    /// Whole local days `first ..= last`.
    pub fn local_days(first: NaiveDate, last: NaiveDate) -> Self {
        ObservationWindow {
            start: local_midnight(first),
            end: local_midnight(last.succ_opt().expect("date in range")),
        }
    }

    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        self.start <= ts && ts < self.end
    }
}

fn require<T>(v: Option<T>, field: &'static str) -> Result<T, ValidationError> {
    v.ok_or(ValidationError::FieldMissing { field })
}

fn forbid<T>(v: &Option<T>, field: &'static str, kind: EventKind) -> Result<(), ValidationError> {
    match v {
        None => Ok(()),
        Some(_) => Err(ValidationError::range(
            field,
            format!("not applicable to kind `{}`", kind.wire_name()),
        )),
    }
}

fn non_negative_finite(v: f64, field: &'static str) -> Result<f64, ValidationError> {
    if !v.is_finite() || v < 0.0 {
        return Err(ValidationError::range(
            field,
            format!("{v} is not a non-negative number"),
        ));
    }
    Ok(v)
}

/// Checks a raw record (with `device` already anonymized) against every
/// record invariant. The first violation found is reported.
pub fn validate(
    raw: &RawRecord,
    window: Option<&ObservationWindow>,
) -> Result<SessionRecord, ValidationError> {
    let kind: EventKind = raw.kind.parse()?;

    if raw.ts.is_empty() {
        return Err(ValidationError::FieldMissing { field: "ts" });
    }
    let ts = DateTime::parse_from_rfc3339(&raw.ts)
        .map_err(|e| ValidationError::range("ts", e.to_string()))?
        .with_timezone(&Utc);
    // second resolution
    let ts = ts.with_nanosecond(0).expect("zero nanos is valid");
    if let Some(w) = window {
        if !w.contains(ts) {
            return Err(ValidationError::range(
                "ts",
                "outside the observation window",
            ));
        }
    }

    if raw.device.is_empty() {
        return Err(ValidationError::FieldMissing { field: "device" });
    }
    let device: DeviceId = raw.device.parse()?;
    if raw.ap.is_empty() {
        return Err(ValidationError::FieldMissing { field: "ap" });
    }
    let ap = ApId::new(&raw.ap)?;

    if kind != EventKind::Disassoc {
        forbid(&raw.session_minutes, "session_minutes", kind)?;
    }
    if kind != EventKind::TrafficSample {
        forbid(&raw.bytes_up, "bytes_up", kind)?;
        forbid(&raw.bytes_down, "bytes_down", kind)?;
        forbid(&raw.proto, "proto", kind)?;
    }
    if kind != EventKind::ApHealth {
        forbid(&raw.latency_ms, "latency_ms", kind)?;
        forbid(&raw.loss_pct, "loss_pct", kind)?;
    }

    let event = match kind {
        EventKind::Assoc => Event::Assoc,
        EventKind::AuthFail => Event::AuthFail,
        EventKind::Disassoc => {
            let m = non_negative_finite(
                require(raw.session_minutes, "session_minutes")?,
                "session_minutes",
            )?;
            if m > MAX_SESSION_MINUTES {
                return Err(ValidationError::range(
                    "session_minutes",
                    format!("{m} exceeds {MAX_SESSION_MINUTES}"),
                ));
            }
            Event::Disassoc { session_minutes: m }
        }
        EventKind::TrafficSample => {
            let up = require(raw.bytes_up, "bytes_up")?;
            let down = require(raw.bytes_down, "bytes_down")?;
            let proto: Protocol = require(raw.proto.as_deref(), "proto")?.parse()?;
            if up < 0 {
                return Err(ValidationError::range("bytes_up", "negative byte count"));
            }
            if down < 0 {
                return Err(ValidationError::range("bytes_down", "negative byte count"));
            }
            Event::Traffic {
                bytes_up: up as u64,
                bytes_down: down as u64,
                proto,
            }
        }
        EventKind::ApHealth => {
            let latency_ms =
                non_negative_finite(require(raw.latency_ms, "latency_ms")?, "latency_ms")?;
            let loss_pct = non_negative_finite(require(raw.loss_pct, "loss_pct")?, "loss_pct")?;
            if loss_pct > 100.0 {
                return Err(ValidationError::range(
                    "loss_pct",
                    format!("{loss_pct} exceeds 100"),
                ));
            }
            Event::ApHealth {
                latency_ms,
                loss_pct,
            }
        }
    };

    Ok(SessionRecord {
        ts,
        device,
        ap,
        event,
    })
}

/// One local day's metric vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyAggregate {
    pub day: NaiveDate,
    pub connections: u64,
    pub distinct_devices: u64,
    pub mean_session_minutes: f64,
    pub auth_failures: u64,
    pub unexpected_disconnects: u64,
    pub traffic_gb: f64,
    pub overload_pct: f64,
    pub proto_share: BTreeMap<Protocol, f64>,
    pub duplicate_device_events: u64,
}

impl DailyAggregate {
    pub fn zero(day: NaiveDate) -> Self {
        DailyAggregate {
            day,
            connections: 0,
            distinct_devices: 0,
            mean_session_minutes: 0.0,
            auth_failures: 0,
            unexpected_disconnects: 0,
            traffic_gb: 0.0,
            overload_pct: 0.0,
            proto_share: Protocol::ALL.into_iter().map(|p| (p, 0.0)).collect(),
            duplicate_device_events: 0,
        }
    }

    pub fn share(&self, proto: Protocol) -> f64 {
        self.proto_share.get(&proto).copied().unwrap_or(0.0)
    }
}

/// Every per-day metric the baseline tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Connections,
    DistinctDevices,
    MeanSessionMinutes,
    AuthFailures,
    UnexpectedDisconnects,
    TrafficGb,
    OverloadPct,
    DuplicateDeviceEvents,
    ShareHttp,
    ShareHttps,
    ShareDns,
    ShareUdp,
    ShareOther,
}

impl Metric {
    pub const ALL: [Metric; 13] = [
        Metric::Connections,
        Metric::DistinctDevices,
        Metric::MeanSessionMinutes,
        Metric::AuthFailures,
        Metric::UnexpectedDisconnects,
        Metric::TrafficGb,
        Metric::OverloadPct,
        Metric::DuplicateDeviceEvents,
        Metric::ShareHttp,
        Metric::ShareHttps,
        Metric::ShareDns,
        Metric::ShareUdp,
        Metric::ShareOther,
    ];

    pub fn share_of(proto: Protocol) -> Metric {
        match proto {
            Protocol::Http => Metric::ShareHttp,
            Protocol::Https => Metric::ShareHttps,
            Protocol::Dns => Metric::ShareDns,
            Protocol::Udp => Metric::ShareUdp,
            Protocol::Other => Metric::ShareOther,
        }
    }

    /// Value of this metric on `agg`. Protocol shares are undefined (None) on
    /// days without traffic.
    pub fn value(self, agg: &DailyAggregate) -> Option<f64> {
        let v = match self {
            Metric::Connections => agg.connections as f64,
            Metric::DistinctDevices => agg.distinct_devices as f64,
            Metric::MeanSessionMinutes => agg.mean_session_minutes,
            Metric::AuthFailures => agg.auth_failures as f64,
            Metric::UnexpectedDisconnects => agg.unexpected_disconnects as f64,
            Metric::TrafficGb => agg.traffic_gb,
            Metric::OverloadPct => agg.overload_pct,
            Metric::DuplicateDeviceEvents => agg.duplicate_device_events as f64,
            Metric::ShareHttp
            | Metric::ShareHttps
            | Metric::ShareDns
            | Metric::ShareUdp
            | Metric::ShareOther => {
                if agg.traffic_gb <= 0.0 {
                    return None;
                }
                let proto = match self {
                    Metric::ShareHttp => Protocol::Http,
                    Metric::ShareHttps => Protocol::Https,
                    Metric::ShareDns => Protocol::Dns,
                    Metric::ShareUdp => Protocol::Udp,
                    _ => Protocol::Other,
                };
                agg.share(proto)
            }
        };
        Some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
    pub n: usize,
}

/// Statistics of one day-of-week slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotProfile {
    /// Monday = 0.
    pub weekday: usize,
    /// Days of this weekday present in the input.
    pub days: usize,
    /// True when `days` was below the minimum and all-days statistics are used.
    pub fallback: bool,
    pub metrics: BTreeMap<Metric, MetricStats>,
}

/// Per-weekday normal behaviour of every aggregate metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineProfile {
    pub slots: Vec<SlotProfile>,
    pub window_days: usize,
    pub built_from: (NaiveDate, NaiveDate),
}

impl BaselineProfile {
    pub fn slot(&self, day: NaiveDate) -> &SlotProfile {
        &self.slots[weekday_slot(day)]
    }

    pub fn stats(&self, day: NaiveDate, metric: Metric) -> Option<MetricStats> {
        self.slot(day).metrics.get(&metric).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnomalyType {
    AuthBurst,
    DnsAnomaly,
    SimultaneousConnections,
    DuplicateDevice,
    TrafficSpike,
    ApOverload,
    MultivariateOutlier,
}

impl AnomalyType {
    pub const ALL: [AnomalyType; 7] = [
        AnomalyType::AuthBurst,
        AnomalyType::DnsAnomaly,
        AnomalyType::SimultaneousConnections,
        AnomalyType::DuplicateDevice,
        AnomalyType::TrafficSpike,
        AnomalyType::ApOverload,
        AnomalyType::MultivariateOutlier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnomalyType::AuthBurst => "AuthBurst",
            AnomalyType::DnsAnomaly => "DnsAnomaly",
            AnomalyType::SimultaneousConnections => "SimultaneousConnections",
            AnomalyType::DuplicateDevice => "DuplicateDevice",
            AnomalyType::TrafficSpike => "TrafficSpike",
            AnomalyType::ApOverload => "ApOverload",
            AnomalyType::MultivariateOutlier => "MultivariateOutlier",
        }
    }

    /// Types whose events name a specific device.
    pub fn is_device_scoped(self) -> bool {
        matches!(
            self,
            AnomalyType::SimultaneousConnections | AnomalyType::DuplicateDevice
        )
    }
}

impl fmt::Display for AnomalyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    Threshold,
    IsolationForest,
    Dbscan,
    Rule,
}

/// What an event or recommendation is about.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "scope", content = "id", rename_all = "snake_case")]
pub enum Target {
    Device(DeviceId),
    Ap(ApId),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Device(d) => write!(f, "device:{d}"),
            Target::Ap(a) => write!(f, "ap:{a}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub note: String,
    pub metrics: BTreeMap<String, f64>,
}

/// A detected deviation, classified by type and severity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    /// Stable reference `<day>/<type>/<target or network>`.
    pub id: String,
    pub day: NaiveDate,
    #[serde(rename = "type")]
    pub kind: AnomalyType,
    pub severity: Severity,
    pub score: f64,
    pub detector: Detector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    pub evidence: Evidence,
}

impl AnomalyEvent {
    pub fn make_id(day: NaiveDate, kind: AnomalyType, target: Option<&Target>) -> String {
        match target {
            Some(t) => format!("{day}/{kind}/{t}"),
            None => format!("{day}/{kind}/network"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    ChannelReassign,
    LoadRedistribution,
    Segmentation,
    AuthPolicyReview,
    CapacityExpansion,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "scope", content = "id", rename_all = "snake_case")]
pub enum RecTarget {
    Ap(ApId),
    Network,
}

impl fmt::Display for RecTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecTarget::Ap(a) => write!(f, "{a}"),
            RecTarget::Network => f.write_str("network-wide"),
        }
    }
}

/// Advisory action bound to anomalies or an AP condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub target: RecTarget,
    pub action: Action,
    pub rationale: String,
    /// Ids of the triggering [`AnomalyEvent`]s.
    pub linked_events: Vec<String>,
}
