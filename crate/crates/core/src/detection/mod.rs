//! Predictive analytics: anomaly detectors and the type/severity classifier.
//!
//! Three detector families run over the month:
//!
//! * dynamic thresholds on per-day metric series and on protocol shares,
//! * an isolation forest and DBSCAN over per-day feature vectors,
//! * device-level rules (overlapping sessions, heavy hitters).
//!
//! Detectors emit [`RawDetection`]s; [`classify`] turns them into
//! [`AnomalyEvent`](crate::domain::AnomalyEvent)s with a severity.

mod classify;
mod dbscan;
mod features;
mod iforest;
mod rules;
mod threshold;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AnomalyType, BaselineProfile, DailyAggregate, Detector, Evidence, Metric, SessionRecord, Target,
};

pub use classify::{classify, ClassifyConfig};
pub use dbscan::{dbscan, Label};
pub use features::{feature_vectors, FeatureVector, FEATURE_METRICS, Z_EPSILON};
pub use iforest::{
    average_path_length, c_factor, fit_isolation_forest, harmonic, iforest_score, score_from_path,
    ForestModel, ForestParams, IsolationTree, Node, MODEL_VERSION,
};
pub use rules::{detect_duplicate_devices, detect_heavy_hitters};
pub use threshold::{
    dynamic_threshold_alerts, protocol_anomaly, rising_threshold_alerts, threshold_alert_indices,
    BandAlert,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error("need at least 2 points to fit, got {0}")]
    TooFewPoints(usize),
    #[error("series of length {len} is too short for window {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A detector hit before severity classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDetection {
    pub day: NaiveDate,
    pub kind: AnomalyType,
    pub score: f64,
    pub detector: Detector,
    pub target: Option<Target>,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Rolling window, in days, of the dynamic thresholds.
    pub window: usize,
    /// Alert band half-width in standard deviations.
    pub k: f64,
    /// More overlapping sessions than this from one device is suspicious.
    pub max_concurrent: usize,
    /// Daily bytes of one device, in GB, above which it is a heavy hitter.
    pub heavy_hitter_gb: f64,
    pub forest: ForestParams,
    /// Isolation-forest scores at or below this are not reported.
    pub iforest_floor: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Keep only upward threshold alerts; every monitored series is typed
    /// as a burst, spike or overload.
    pub rising_only: bool,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            window: 7,
            k: 3.0,
            max_concurrent: 3,
            heavy_hitter_gb: 10.0,
            forest: ForestParams::default(),
            iforest_floor: 0.6,
            dbscan_eps: 4.0,
            dbscan_min_pts: 3,
            rising_only: true,
        }
    }
}

impl DetectionConfig {
    pub fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            k: self.k,
            iforest_floor: self.iforest_floor,
            ..ClassifyConfig::default()
        }
    }
}

/// Everything the detection stage produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutput {
    pub features: Vec<FeatureVector>,
    pub model: ForestModel,
    pub iforest_scores: Vec<f64>,
    pub dbscan_labels: Vec<Label>,
    pub raw: Vec<RawDetection>,
}

/// Series monitored by the dynamic thresholds and the type each maps to.
pub const THRESHOLD_SERIES: [(Metric, AnomalyType); 4] = [
    (Metric::AuthFailures, AnomalyType::AuthBurst),
    (Metric::TrafficGb, AnomalyType::TrafficSpike),
    (Metric::OverloadPct, AnomalyType::ApOverload),
    (Metric::ShareDns, AnomalyType::DnsAnomaly),
];

/// Runs every detector over one month. Threshold series no longer than the
/// window produce no alerts rather than an error; with `cfg.rising_only`
/// drops below the band are discarded.
pub fn detect_all(
    records: &[SessionRecord],
    aggregates: &[DailyAggregate],
    baseline: &BaselineProfile,
    cfg: &DetectionConfig,
) -> Result<DetectionOutput, DetectionError> {
    let mut raw = Vec::new();

    for (metric, kind) in THRESHOLD_SERIES {
        let series: Vec<(NaiveDate, f64)> = aggregates
            .iter()
            .map(|a| (a.day, metric.value(a).unwrap_or(0.0)))
            .collect();
        let found = if cfg.rising_only {
            rising_threshold_alerts(&series, cfg.window, cfg.k, kind, metric)
        } else {
            dynamic_threshold_alerts(&series, cfg.window, cfg.k, kind, metric)
        };
        match found {
            Ok(found) => raw.extend(found),
            Err(DetectionError::SeriesTooShort { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    for agg in aggregates {
        raw.extend(protocol_anomaly(agg, baseline, cfg.k));
    }

    let features = feature_vectors(aggregates, baseline);
    let model = fit_isolation_forest(&features, &cfg.forest)?;
    let iforest_scores: Vec<f64> = features.iter().map(|f| iforest_score(&model, f)).collect();
    for (f, &score) in features.iter().zip(&iforest_scores) {
        if score > cfg.iforest_floor {
            raw.push(RawDetection {
                day: f.day,
                kind: AnomalyType::MultivariateOutlier,
                score,
                detector: Detector::IsolationForest,
                target: None,
                evidence: f.evidence("isolation forest score above floor"),
            });
        }
    }

    let dbscan_labels = dbscan(&features, cfg.dbscan_eps, cfg.dbscan_min_pts);
    for (f, label) in features.iter().zip(&dbscan_labels) {
        if *label == Label::Noise {
            raw.push(RawDetection {
                day: f.day,
                kind: AnomalyType::MultivariateOutlier,
                score: f.norm(),
                detector: Detector::Dbscan,
                target: None,
                evidence: f.evidence("day is a density-clustering noise point"),
            });
        }
    }

    raw.extend(detect_duplicate_devices(records, cfg.max_concurrent));
    raw.extend(detect_heavy_hitters(records, cfg.heavy_hitter_gb));

    Ok(DetectionOutput {
        features,
        model,
        iforest_scores,
        dbscan_labels,
        raw,
    })
}
