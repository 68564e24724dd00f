use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use super::RawDetection;
use crate::descriptive::{peak_concurrency, SessionInterval};
use crate::domain::{
    local_date, AnomalyType, Detector, DeviceId, Event, Evidence, SessionRecord, Target,
    BYTES_PER_GB,
};

/// Overlapping-session rules, evaluated per device and local day (the day a
/// session ends).
///
/// * more than `max_concurrent` sessions open at once → `SimultaneousConnections`
/// * overlapping sessions on two or more APs → `DuplicateDevice`
pub fn detect_duplicate_devices(
    records: &[SessionRecord],
    max_concurrent: usize,
) -> Vec<RawDetection> {
    let mut groups: BTreeMap<(NaiveDate, DeviceId), Vec<SessionInterval>> = BTreeMap::new();
    for s in records.iter().filter_map(SessionInterval::from_record) {
        groups
            .entry((local_date(s.end), s.device))
            .or_default()
            .push(s);
    }

    let mut out = Vec::new();
    for ((day, device), sessions) in groups {
        if sessions.len() < 2 {
            continue;
        }
        let mut sweep: Vec<(i64, i8)> = sessions
            .iter()
            .flat_map(|s| [(s.start.timestamp(), 1), (s.end.timestamp(), -1)])
            .collect();
        let peak = peak_concurrency(&mut sweep);
        if peak > max_concurrent as u64 {
            out.push(RawDetection {
                day,
                kind: AnomalyType::SimultaneousConnections,
                score: peak as f64,
                detector: Detector::Rule,
                target: Some(Target::Device(device)),
                evidence: Evidence {
                    note: format!("{peak} sessions open at once (limit {max_concurrent})"),
                    metrics: [
                        ("peak_sessions".to_string(), peak as f64),
                        ("sessions".to_string(), sessions.len() as f64),
                    ]
                    .into_iter()
                    .collect(),
                },
            });
        }

        let mut aps = BTreeSet::new();
        for (i, a) in sessions.iter().enumerate() {
            for b in &sessions[i + 1..] {
                if a.ap != b.ap && a.overlaps(b) {
                    aps.insert(a.ap.clone());
                    aps.insert(b.ap.clone());
                }
            }
        }
        if !aps.is_empty() {
            let list: Vec<&str> = aps.iter().map(|a| a.as_str()).collect();
            out.push(RawDetection {
                day,
                kind: AnomalyType::DuplicateDevice,
                score: aps.len() as f64,
                detector: Detector::Rule,
                target: Some(Target::Device(device)),
                evidence: Evidence {
                    note: format!("overlapping sessions on {}", list.join(", ")),
                    metrics: [("distinct_aps".to_string(), aps.len() as f64)]
                        .into_iter()
                        .collect(),
                },
            });
        }
    }
    out
}

/// Devices moving more than `threshold_gb` in one local day → `TrafficSpike`.
pub fn detect_heavy_hitters(records: &[SessionRecord], threshold_gb: f64) -> Vec<RawDetection> {
    let mut bytes: BTreeMap<(NaiveDate, DeviceId), u64> = BTreeMap::new();
    for r in records {
        if let Event::Traffic {
            bytes_up,
            bytes_down,
            ..
        } = r.event
        {
            *bytes.entry((r.local_date(), r.device)).or_default() += bytes_up + bytes_down;
        }
    }
    bytes
        .into_iter()
        .filter_map(|((day, device), b)| {
            let gb = b as f64 / BYTES_PER_GB;
            (gb > threshold_gb).then(|| RawDetection {
                day,
                kind: AnomalyType::TrafficSpike,
                score: gb / threshold_gb,
                detector: Detector::Rule,
                target: Some(Target::Device(device)),
                evidence: Evidence {
                    note: format!("device moved {gb:.1} GB in one day"),
                    metrics: [("device_gb".to_string(), gb)].into_iter().collect(),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{local_midnight, ApId, Protocol};
    use chrono::{DateTime, Duration, Utc};

    fn at(h: u32, m: u32) -> DateTime<Utc> {
        local_midnight(NaiveDate::from_ymd_opt(2025, 4, 7).unwrap())
            + Duration::minutes((h * 60 + m) as i64)
    }

    /// Assoc + Disassoc pair for one session.
    fn session(dev: u8, ap: &str, start: DateTime<Utc>, end: DateTime<Utc>) -> Vec<SessionRecord> {
        let device = DeviceId::from_bytes([dev; 16]);
        let ap = ApId::new(ap).unwrap();
        vec![
            SessionRecord {
                ts: start,
                device,
                ap: ap.clone(),
                event: Event::Assoc,
            },
            SessionRecord {
                ts: end,
                device,
                ap,
                event: Event::Disassoc {
                    session_minutes: (end - start).num_seconds() as f64 / 60.0,
                },
            },
        ]
    }

    #[test]
    fn sequential_sessions_are_clean() {
        let mut recs = session(1, "AP-1", at(9, 0), at(10, 0));
        recs.extend(session(1, "AP-2", at(10, 0), at(11, 0)));
        recs.extend(session(1, "AP-1", at(12, 0), at(13, 0)));
        assert!(detect_duplicate_devices(&recs, 3).is_empty());
    }

    #[test]
    fn overlap_across_aps_is_a_duplicate() {
        let mut recs = session(1, "AP-1", at(10, 0), at(11, 0));
        recs.extend(session(1, "AP-2", at(10, 30), at(11, 30)));
        let found = detect_duplicate_devices(&recs, 3);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, AnomalyType::DuplicateDevice);
        assert_eq!(
            found[0].target,
            Some(Target::Device(DeviceId::from_bytes([1; 16])))
        );
    }

    #[test]
    fn three_overlapping_sessions_exceed_two() {
        let mut recs = Vec::new();
        for i in 0..3 {
            recs.extend(session(4, "AP-1", at(10, i * 5), at(11, 0)));
        }
        let found = detect_duplicate_devices(&recs, 2);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, AnomalyType::SimultaneousConnections);
        assert_eq!(found[0].score, 3.0);
        assert!(detect_duplicate_devices(&recs, 3).is_empty());
    }

    #[test]
    fn heavy_hitter_threshold() {
        let device = DeviceId::from_bytes([9; 16]);
        let rec = |bytes| SessionRecord {
            ts: at(12, 0),
            device,
            ap: ApId::new("AP-3").unwrap(),
            event: Event::Traffic {
                bytes_up: 0,
                bytes_down: bytes,
                proto: Protocol::Udp,
            },
        };
        assert!(detect_heavy_hitters(&[rec(6_000_000_000)], 10.0).is_empty());
        let found = detect_heavy_hitters(&[rec(6_000_000_000), rec(6_000_000_000)], 10.0);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, AnomalyType::TrafficSpike);
    }
}
