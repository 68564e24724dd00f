use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::RawDetection;
use crate::domain::{AnomalyEvent, Detector, Severity, Target};

/// Severity bands. These are calibration choices, not measured facts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Threshold scores: Low in (k, 2k], Medium in (2k, 4k], High above 4k.
    pub k: f64,
    /// Isolation-forest scores at or below this are dropped.
    pub iforest_floor: f64,
    pub iforest_medium: f64,
    pub iforest_high: f64,
    /// A rule target flagged on this many distinct days escalates to High.
    pub recurrence_days: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            k: 3.0,
            iforest_floor: 0.6,
            iforest_medium: 0.7,
            iforest_high: 0.8,
            recurrence_days: 3,
        }
    }
}

fn band(score: f64, low: f64, medium: f64, high: f64) -> Option<Severity> {
    if score > high {
        Some(Severity::High)
    } else if score > medium {
        Some(Severity::Medium)
    } else if score > low {
        Some(Severity::Low)
    } else {
        None
    }
}

/// Assigns severities, drops sub-floor hits and merges detections sharing a
/// `(day, type, target)` id, keeping the most severe (then highest score).
/// Output is sorted by day, type and id.
pub fn classify(raw: &[RawDetection], cfg: &ClassifyConfig) -> Vec<AnomalyEvent> {
    let mut rule_days: BTreeMap<&Target, BTreeSet<NaiveDate>> = BTreeMap::new();
    for d in raw.iter().filter(|d| d.detector == Detector::Rule) {
        if let Some(t) = &d.target {
            rule_days.entry(t).or_default().insert(d.day);
        }
    }

    let mut best: BTreeMap<String, AnomalyEvent> = BTreeMap::new();
    for d in raw {
        let severity = match d.detector {
            Detector::Threshold => band(d.score, cfg.k, 2.0 * cfg.k, 4.0 * cfg.k),
            Detector::IsolationForest => band(
                d.score,
                cfg.iforest_floor,
                cfg.iforest_medium,
                cfg.iforest_high,
            ),
            Detector::Dbscan => Some(Severity::Medium),
            Detector::Rule => {
                let repeated = d
                    .target
                    .as_ref()
                    .and_then(|t| rule_days.get(t))
                    .is_some_and(|days| days.len() >= cfg.recurrence_days);
                Some(if repeated {
                    Severity::High
                } else {
                    Severity::Medium
                })
            }
        };
        let Some(severity) = severity else { continue };
        let id = AnomalyEvent::make_id(d.day, d.kind, d.target.as_ref());
        let event = AnomalyEvent {
            id: id.clone(),
            day: d.day,
            kind: d.kind,
            severity,
            score: d.score,
            detector: d.detector,
            target: d.target.clone(),
            evidence: d.evidence.clone(),
        };
        match best.get(&id) {
            Some(prev) if !outranks(&event, prev) => {}
            _ => {
                best.insert(id, event);
            }
        }
    }
    let mut out: Vec<AnomalyEvent> = best.into_values().collect();
    out.sort_by(|a, b| (a.day, a.kind, &a.id).cmp(&(b.day, b.kind, &b.id)));
    out
}

fn outranks(a: &AnomalyEvent, b: &AnomalyEvent) -> bool {
    a.severity
        .cmp(&b.severity)
        .then(a.score.total_cmp(&b.score))
        .then(b.detector.cmp(&a.detector))
        .is_gt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AnomalyType, DeviceId, Evidence};

    fn day(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 4, n).unwrap()
    }

    fn det(
        detector: Detector,
        kind: AnomalyType,
        score: f64,
        d: u32,
        target: Option<Target>,
    ) -> RawDetection {
        RawDetection {
            day: day(d),
            kind,
            score,
            detector,
            target,
            evidence: Evidence::default(),
        }
    }

    #[test]
    fn threshold_bands() {
        let cfg = ClassifyConfig::default();
        let sev = |s| {
            classify(
                &[det(Detector::Threshold, AnomalyType::AuthBurst, s, 7, None)],
                &cfg,
            )
            .first()
            .map(|e| e.severity)
        };
        assert_eq!(sev(9.0), Some(Severity::Medium));
        assert_eq!(sev(3.5), Some(Severity::Low));
        assert_eq!(sev(6.0), Some(Severity::Low));
        assert_eq!(sev(12.5), Some(Severity::High));
        assert_eq!(sev(2.9), None);
    }

    #[test]
    fn iforest_bands_and_floor() {
        let cfg = ClassifyConfig::default();
        let sev = |s| {
            classify(
                &[det(
                    Detector::IsolationForest,
                    AnomalyType::MultivariateOutlier,
                    s,
                    7,
                    None,
                )],
                &cfg,
            )
            .first()
            .map(|e| e.severity)
        };
        assert_eq!(sev(0.55), None);
        assert_eq!(sev(0.65), Some(Severity::Low));
        assert_eq!(sev(0.75), Some(Severity::Medium));
        assert_eq!(sev(0.85), Some(Severity::High));
    }

    #[test]
    fn recurring_device_escalates() {
        let t = Some(Target::Device(DeviceId::from_bytes([3; 16])));
        let mut raw: Vec<_> = (7..9)
            .map(|d| {
                det(
                    Detector::Rule,
                    AnomalyType::DuplicateDevice,
                    2.0,
                    d,
                    t.clone(),
                )
            })
            .collect();
        let cfg = ClassifyConfig::default();
        assert!(classify(&raw, &cfg)
            .iter()
            .all(|e| e.severity == Severity::Medium));
        raw.push(det(Detector::Rule, AnomalyType::DuplicateDevice, 2.0, 9, t));
        let out = classify(&raw, &cfg);
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|e| e.severity == Severity::High));
    }

    #[test]
    fn dbscan_noise_is_medium_and_merges_with_forest() {
        let raw = vec![
            det(
                Detector::Dbscan,
                AnomalyType::MultivariateOutlier,
                7.0,
                8,
                None,
            ),
            det(
                Detector::IsolationForest,
                AnomalyType::MultivariateOutlier,
                0.82,
                8,
                None,
            ),
        ];
        let out = classify(&raw, &ClassifyConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].severity, Severity::High);
        assert_eq!(out[0].detector, Detector::IsolationForest);
        assert_eq!(out[0].id, "2025-04-08/MultivariateOutlier/network");
    }
}
