use chrono::NaiveDate;

use super::features::{metric_key, Z_EPSILON};
use super::{DetectionError, RawDetection};
use crate::domain::{
    AnomalyType, BaselineProfile, DailyAggregate, Detector, Evidence, Metric, Protocol,
};
use crate::stats::mean_std;

/// One rolling-band violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandAlert {
    pub index: usize,
    pub value: f64,
    pub mean: f64,
    pub std: f64,
    /// `|x - mean| / max(std, eps)`.
    pub score: f64,
}

/// Flags `x[t]`, `t >= window`, when it leaves `mean ± k·std` of the
/// `window` preceding values. A window whose deviation is zero (to within
/// relative 1e-9) flags any value different from its mean.
pub fn threshold_alert_indices(
    values: &[f64],
    window: usize,
    k: f64,
) -> Result<Vec<BandAlert>, DetectionError> {
    if window < 2 || k.is_nan() || k <= 0.0 {
        return Err(DetectionError::InvalidParameter(format!(
            "threshold needs window >= 2 and k > 0 (got {window}, {k})"
        )));
    }
    if values.len() <= window {
        return Err(DetectionError::SeriesTooShort {
            len: values.len(),
            window,
        });
    }
    let mut out = Vec::new();
    for t in window..values.len() {
        let (mean, std) = mean_std(&values[t - window..t]);
        let x = values[t];
        let dev = (x - mean).abs();
        let tol = Z_EPSILON * mean.abs().max(1.0);
        let alert = if std <= tol { dev > tol } else { dev > k * std };
        if alert {
            out.push(BandAlert {
                index: t,
                value: x,
                mean,
                std,
                score: dev / std.max(Z_EPSILON),
            });
        }
    }
    Ok(out)
}

/// Rolling-band alerts over a dated per-day series, typed as `kind`.
pub fn dynamic_threshold_alerts(
    series: &[(NaiveDate, f64)],
    window: usize,
    k: f64,
    kind: AnomalyType,
    metric: Metric,
) -> Result<Vec<RawDetection>, DetectionError> {
    band_detections(series, window, k, kind, metric, false)
}

/// As [`dynamic_threshold_alerts`], keeping only values above the band.
pub fn rising_threshold_alerts(
    series: &[(NaiveDate, f64)],
    window: usize,
    k: f64,
    kind: AnomalyType,
    metric: Metric,
) -> Result<Vec<RawDetection>, DetectionError> {
    band_detections(series, window, k, kind, metric, true)
}

fn band_detections(
    series: &[(NaiveDate, f64)],
    window: usize,
    k: f64,
    kind: AnomalyType,
    metric: Metric,
    rising_only: bool,
) -> Result<Vec<RawDetection>, DetectionError> {
    let values: Vec<f64> = series.iter().map(|(_, v)| *v).collect();
    let key = metric_key(metric);
    Ok(threshold_alert_indices(&values, window, k)?
        .into_iter()
        .filter(|a| !rising_only || a.value > a.mean)
        .map(|a| RawDetection {
            day: series[a.index].0,
            kind,
            score: a.score,
            detector: Detector::Threshold,
            target: None,
            evidence: Evidence {
                note: format!("{key} left the {window}-day band of ±{k}σ"),
                metrics: [
                    (key.clone(), a.value),
                    ("window_mean".to_string(), a.mean),
                    ("window_std".to_string(), a.std),
                ]
                .into_iter()
                .collect(),
            },
        })
        .collect())
}

/// Per-protocol z-test of the day's traffic shares against its weekday slot.
/// Only increases are reported: DNS as [`AnomalyType::DnsAnomaly`], any other
/// protocol as [`AnomalyType::TrafficSpike`]. Days without traffic yield nothing.
pub fn protocol_anomaly(
    day: &DailyAggregate,
    baseline: &BaselineProfile,
    k: f64,
) -> Vec<RawDetection> {
    if day.traffic_gb <= 0.0 {
        return Vec::new();
    }
    Protocol::ALL
        .iter()
        .filter_map(|&p| {
            let stats = baseline.stats(day.day, Metric::share_of(p))?;
            if stats.n == 0 {
                return None;
            }
            let share = day.share(p);
            let z = (share - stats.mean) / stats.std.max(Z_EPSILON);
            (z > k).then(|| RawDetection {
                day: day.day,
                kind: if p == Protocol::Dns {
                    AnomalyType::DnsAnomaly
                } else {
                    AnomalyType::TrafficSpike
                },
                score: z,
                detector: Detector::Threshold,
                target: None,
                evidence: Evidence {
                    note: format!("{p} traffic share above the weekday baseline"),
                    metrics: [
                        (format!("share_{p}"), share),
                        ("baseline_mean".to_string(), stats.mean),
                        ("baseline_std".to_string(), stats.std),
                    ]
                    .into_iter()
                    .collect(),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{MetricStats, SlotProfile};
    use std::collections::BTreeMap;

    #[test]
    fn constant_series_never_alerts() {
        assert!(threshold_alert_indices(&[5.0; 20], 7, 3.0)
            .unwrap()
            .is_empty());
        assert!(threshold_alert_indices(&[0.1; 20], 7, 3.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn hand_computed_band() {
        // mean 100.25, sample std sqrt(8.75 / 3) = 1.7078, bound 105.37
        let a = threshold_alert_indices(&[100.0, 102.0, 98.0, 101.0, 250.0], 4, 3.0).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].index, 4);
        assert_eq!(a[0].mean, 100.25);
        assert!((a[0].std - (8.75f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((a[0].mean + 3.0 * a[0].std - 105.373).abs() < 1e-3);
    }

    #[test]
    fn rising_filter_drops_drops() {
        let d = NaiveDate::from_ymd_opt(2025, 4, 7).unwrap();
        let series: Vec<_> = [
            100.0, 102.0, 98.0, 101.0, 50.0, 100.0, 99.0, 101.0, 100.0, 250.0,
        ]
        .iter()
        .enumerate()
        .map(|(i, v)| (d + chrono::Duration::days(i as i64), *v))
        .collect();
        let both = dynamic_threshold_alerts(
            &series,
            4,
            3.0,
            AnomalyType::AuthBurst,
            Metric::AuthFailures,
        )
        .unwrap();
        let up = rising_threshold_alerts(
            &series,
            4,
            3.0,
            AnomalyType::AuthBurst,
            Metric::AuthFailures,
        )
        .unwrap();
        assert_eq!(both.len(), 2);
        assert_eq!(up.len(), 1);
        assert_eq!(up[0].day, series[9].0);
    }

    #[test]
    fn zero_variance_window_flags_any_change() {
        let a = threshold_alert_indices(&[10.0, 10.0, 10.0, 10.0, 10.0, 11.0], 5, 3.0).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].index, 5);
    }

    #[test]
    fn short_series_is_an_error() {
        assert_eq!(
            threshold_alert_indices(&[1.0; 7], 7, 3.0),
            Err(DetectionError::SeriesTooShort { len: 7, window: 7 })
        );
    }

    fn baseline_with_dns(mean: f64, std: f64) -> BaselineProfile {
        let mut metrics = BTreeMap::new();
        metrics.insert(Metric::ShareDns, MetricStats { mean, std, n: 30 });
        for p in [
            Protocol::Http,
            Protocol::Https,
            Protocol::Udp,
            Protocol::Other,
        ] {
            metrics.insert(
                Metric::share_of(p),
                MetricStats {
                    mean: 0.5,
                    std: 0.5,
                    n: 30,
                },
            );
        }
        let d = NaiveDate::from_ymd_opt(2025, 4, 7).unwrap();
        BaselineProfile {
            slots: (0..7)
                .map(|w| SlotProfile {
                    weekday: w,
                    days: 5,
                    fallback: false,
                    metrics: metrics.clone(),
                })
                .collect(),
            window_days: 30,
            built_from: (d, d),
        }
    }

    fn day_with_dns(share: f64) -> DailyAggregate {
        let mut a = DailyAggregate::zero(NaiveDate::from_ymd_opt(2025, 4, 9).unwrap());
        a.traffic_gb = 100.0;
        a.proto_share.insert(Protocol::Dns, share);
        a.proto_share.insert(Protocol::Https, 1.0 - share);
        a
    }

    #[test]
    fn dns_share_jump_scores_its_z() {
        let found = protocol_anomaly(&day_with_dns(0.25), &baseline_with_dns(0.05, 0.01), 3.0);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, AnomalyType::DnsAnomaly);
        assert!((found[0].score - 20.0).abs() < 1e-9);
    }

    #[test]
    fn baseline_share_is_quiet() {
        assert!(
            protocol_anomaly(&day_with_dns(0.05), &baseline_with_dns(0.05, 0.01), 3.0).is_empty()
        );
        let mut empty = day_with_dns(0.9);
        empty.traffic_gb = 0.0;
        assert!(protocol_anomaly(&empty, &baseline_with_dns(0.05, 0.01), 3.0).is_empty());
    }
}
