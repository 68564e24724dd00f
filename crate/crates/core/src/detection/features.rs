use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::{BaselineProfile, DailyAggregate, Evidence, Metric};

/// Floor applied to the baseline deviation when computing z-scores.
pub const Z_EPSILON: f64 = 1e-9;

/// Feature order of [`FeatureVector::values`].
pub const FEATURE_METRICS: [Metric; 7] = [
    Metric::Connections,
    Metric::MeanSessionMinutes,
    Metric::AuthFailures,
    Metric::TrafficGb,
    Metric::OverloadPct,
    Metric::ShareDns,
    Metric::DuplicateDeviceEvents,
];

/// Z-scores of one day's metrics against its weekday baseline slot, in
/// [`FEATURE_METRICS`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub day: NaiveDate,
    pub values: [f64; 7],
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

impl FeatureVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn evidence(&self, note: &str) -> Evidence {
        Evidence {
            note: note.to_string(),
            metrics: FEATURE_METRICS
                .iter()
                .zip(self.values)
                .map(|(m, v)| (format!("z_{}", metric_key(*m)), v))
                .collect(),
        }
    }
}

pub(crate) fn metric_key(m: Metric) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// One feature vector per aggregate. A metric that is undefined on a day
/// (protocol share without traffic) or missing from the baseline scores 0.
pub fn feature_vectors(
    aggregates: &[DailyAggregate],
    baseline: &BaselineProfile,
) -> Vec<FeatureVector> {
    aggregates
        .iter()
        .map(|a| {
            let mut values = [0.0; 7];
            for (slot, m) in values.iter_mut().zip(FEATURE_METRICS) {
                if let (Some(x), Some(s)) = (m.value(a), baseline.stats(a.day, m)) {
                    *slot = (x - s.mean) / s.std.max(Z_EPSILON);
                }
            }
            FeatureVector { day: a.day, values }
        })
        .collect()
}
