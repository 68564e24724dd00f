//! Batch orchestration: descriptive, then detection, then prescriptive, sealed
//! into one [`AnalysisRun`] that can be written to and read from a directory.
//!
//! The input digest is SHA-256 over the records' canonical JSONL lines
//! (the ingest wire form, one record per line), sorted bytewise and joined
//! with `\n`. It does not depend on record order.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{NaiveDate, SecondsFormat, Utc};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::descriptive::{
    aggregate_all, ap_load_stats, build_baseline, hourly_profile, AggregateConfig, ApStats,
    DescriptiveError, HourlyProfile,
};
use crate::detection::{
    classify, detect_all, DetectionConfig, DetectionError, DetectionOutput, FeatureVector,
    ForestModel, Label, RawDetection,
};
use crate::domain::{
    AnomalyEvent, AnomalyType, BaselineProfile, DailyAggregate, EventKind, ObservationWindow,
    Recommendation, SessionRecord, Target,
};
use crate::prescriptive::{recommend, LoadContext, PrescriptiveConfig};
use crate::simulator::GroundTruth;

/// Fewest days a run accepts.
pub const MIN_DAYS: usize = 7;
/// Smallest rolling window the pipeline accepts.
pub const MIN_WINDOW: usize = 5;
pub const DIGEST_ALGORITHM: &str =
    "sha256 over bytewise-sorted canonical JSONL record lines joined by newline";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("need at least {need} days of records, got {have}")]
    InsufficientDays { have: usize, need: usize },
    #[error("descriptive stage: {0}")]
    Descriptive(#[from] DescriptiveError),
    #[error("detection stage: {0}")]
    Detection(#[from] DetectionError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub aggregate: AggregateConfig,
    /// Days a weekday slot needs before it stops falling back to all days.
    pub min_slot_days: usize,
    pub detection: DetectionConfig,
    pub prescriptive: PrescriptiveConfig,
    /// Local days analyzed, inclusive. When absent, the span from the first
    /// to the last day holding an association.
    pub days: Option<(NaiveDate, NaiveDate)>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            aggregate: AggregateConfig::default(),
            min_slot_days: crate::descriptive::MIN_BASELINE_DAYS,
            detection: DetectionConfig::default(),
            prescriptive: PrescriptiveConfig::default(),
            days: None,
        }
    }
}

impl PipelineConfig {
    /// Applies `key=value` override lines, e.g. `detection.window=10`.
    pub fn apply_overrides(&mut self, text: &str) -> Result<(), PipelineError> {
        *self =
            crate::overrides::apply_overrides(self, text).map_err(PipelineError::InvalidConfig)?;
        self.validate()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let d = &self.detection;
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if d.window < MIN_WINDOW {
            return bad(format!(
                "window must be at least {MIN_WINDOW} days, got {}",
                d.window
            ));
        }
        if [d.k, self.prescriptive.k]
            .iter()
            .any(|k| k.is_nan() || *k <= 0.0)
        {
            return bad("k must be positive".into());
        }
        if d.max_concurrent < 1 {
            return bad("max_concurrent must be at least 1".into());
        }
        if d.dbscan_eps.is_nan() || d.dbscan_eps <= 0.0 || d.dbscan_min_pts < 1 {
            return bad("dbscan needs eps > 0 and min_pts >= 1".into());
        }
        if self.aggregate.overload_threshold == 0 {
            return bad("overload threshold must be positive".into());
        }
        if let Some((a, b)) = self.days {
            if a > b {
                return bad(format!("day range {a}..{b} is empty"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

/// Output of the descriptive stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub aggregates: Vec<DailyAggregate>,
    pub baseline: BaselineProfile,
    pub hourly: HourlyProfile,
    pub ap_stats: Vec<ApStats>,
}

/// One sealed analysis. `run_id` and `timings` vary between otherwise
/// identical runs; everything else is a function of the inputs and config.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRun {
    pub run_id: String,
    pub input_digest: String,
    pub record_count: usize,
    pub config: PipelineConfig,
    pub descriptive: Descriptive,
    pub detection: DetectionOutput,
    pub anomalies: Vec<AnomalyEvent>,
    pub recommendations: Vec<Recommendation>,
    pub daily_anomaly_counts: BTreeMap<NaiveDate, usize>,
    pub timings: Vec<StageTiming>,
}

/// Content digest of a record set; see the module docs.
pub fn input_digest(records: &[SessionRecord]) -> String {
    let mut lines: Vec<String> = records
        .par_iter()
        .map(|r| serde_json::to_string(&r.to_raw()).expect("records serialize"))
        .collect();
    lines.par_sort_unstable();
    let mut h = Sha256::new();
    for (i, l) in lines.iter().enumerate() {
        if i > 0 {
            h.update(b"\n");
        }
        h.update(l.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Resolves the analyzed day span and the records falling in it.
pub fn select_days<'a>(
    records: &'a [SessionRecord],
    cfg: &PipelineConfig,
) -> Result<(NaiveDate, NaiveDate, Cow<'a, [SessionRecord]>), PipelineError> {
    let (first, last) = match cfg.days {
        Some(span) => span,
        None => {
            let days: BTreeSet<NaiveDate> = records
                .iter()
                .filter(|r| r.kind() == EventKind::Assoc)
                .map(|r| r.local_date())
                .collect();
            match (days.first(), days.last()) {
                (Some(a), Some(b)) => (*a, *b),
                _ => {
                    return Err(PipelineError::InsufficientDays {
                        have: 0,
                        need: MIN_DAYS,
                    })
                }
            }
        }
    };
    let span = (last - first).num_days() as usize + 1;
    if span < MIN_DAYS {
        return Err(PipelineError::InsufficientDays {
            have: span,
            need: MIN_DAYS,
        });
    }
    let window = ObservationWindow::local_days(first, last);
    let selected = if records.iter().all(|r| window.contains(r.ts)) {
        Cow::Borrowed(records)
    } else {
        Cow::Owned(
            records
                .iter()
                .filter(|r| window.contains(r.ts))
                .cloned()
                .collect(),
        )
    };
    Ok((first, last, selected))
}

/// Aggregates, baseline, hourly profile and AP statistics of `records`,
/// which must already be restricted to `first..=last`.
pub fn describe(
    records: &[SessionRecord],
    first: NaiveDate,
    last: NaiveDate,
    cfg: &PipelineConfig,
) -> Result<Descriptive, PipelineError> {
    let mut aggregates = aggregate_all(records, &cfg.aggregate);
    // pad days without any record so every day of the span is present
    let have: BTreeSet<NaiveDate> = aggregates.iter().map(|a| a.day).collect();
    for d in first.iter_days().take_while(|d| *d <= last) {
        if !have.contains(&d) {
            aggregates.push(DailyAggregate::zero(d));
        }
    }
    aggregates.retain(|a| a.day >= first && a.day <= last);
    aggregates.sort_by_key(|a| a.day);
    let baseline = build_baseline(&aggregates, cfg.min_slot_days)?;
    let window = ObservationWindow::local_days(first, last);
    Ok(Descriptive {
        first_day: first,
        last_day: last,
        hourly: hourly_profile(records),
        ap_stats: ap_load_stats(records, Some(&window), cfg.aggregate.overload_threshold),
        aggregates,
        baseline,
    })
}

/// Runs every detector and classifies the hits.
pub fn detect(
    records: &[SessionRecord],
    desc: &Descriptive,
    cfg: &PipelineConfig,
) -> Result<(DetectionOutput, Vec<AnomalyEvent>), PipelineError> {
    let out = detect_all(records, &desc.aggregates, &desc.baseline, &cfg.detection)?;
    let anomalies = classify(&out.raw, &cfg.detection.classify_config());
    Ok((out, anomalies))
}

pub fn prescribe(
    desc: &Descriptive,
    anomalies: &[AnomalyEvent],
    cfg: &PipelineConfig,
) -> Vec<Recommendation> {
    recommend(
        anomalies,
        &desc.ap_stats,
        Some(LoadContext {
            aggregates: &desc.aggregates,
            baseline: &desc.baseline,
        }),
        &cfg.prescriptive,
    )
}

/// Anomalies per analyzed day, zero-filled.
pub fn daily_counts(desc: &Descriptive, anomalies: &[AnomalyEvent]) -> BTreeMap<NaiveDate, usize> {
    let mut counts: BTreeMap<NaiveDate, usize> =
        desc.aggregates.iter().map(|a| (a.day, 0)).collect();
    for e in anomalies {
        if let Some(c) = counts.get_mut(&e.day) {
            *c += 1;
        }
    }
    counts
}

pub fn run_pipeline(
    records: &[SessionRecord],
    cfg: &PipelineConfig,
) -> Result<AnalysisRun, PipelineError> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &str, timings: &mut Vec<StageTiming>| {
        timings.push(StageTiming {
            stage: stage.to_string(),
            millis: clock.elapsed().as_secs_f64() * 1e3,
        });
        clock = Instant::now();
    };

    let input_digest = input_digest(records);
    let (first, last, selected) = select_days(records, cfg)?;
    lap("digest", &mut timings);
    let descriptive = describe(&selected, first, last, cfg)?;
    lap("descriptive", &mut timings);
    let (detection, anomalies) = detect(&selected, &descriptive, cfg)?;
    lap("detection", &mut timings);
    let recommendations = prescribe(&descriptive, &anomalies, cfg);
    lap("prescriptive", &mut timings);

    let daily_anomaly_counts = daily_counts(&descriptive, &anomalies);
    Ok(AnalysisRun {
        run_id: format!(
            "{}-{}",
            Utc::now().format("%Y%m%dT%H%M%S%.3fZ"),
            &input_digest[..8]
        ),
        input_digest,
        record_count: records.len(),
        config: cfg.clone(),
        descriptive,
        detection,
        anomalies,
        recommendations,
        daily_anomaly_counts,
        timings,
    })
}

/// Run-level facts that are not in any other artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub input_digest: String,
    pub record_count: usize,
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub anomaly_count: usize,
    pub recommendation_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IforestScores {
    pub iforest_scores: Vec<f64>,
    pub dbscan_labels: Vec<Label>,
}

/// `manifest.json`: the only artifact holding per-invocation values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub run_id: String,
    pub created_at: String,
    pub digest_algorithm: String,
    pub input_digest: String,
    pub timings: Vec<StageTiming>,
    /// Artifact file name to SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
}

pub const MANIFEST: &str = "manifest.json";

/// Artifact file names, in write order.
pub const ARTIFACTS: [&str; 13] = [
    "config.json",
    "summary.json",
    "aggregates.json",
    "baseline.json",
    "hourly.json",
    "ap_stats.json",
    "features.json",
    "model.json",
    "scores.json",
    "detections.json",
    "anomalies.json",
    "recommendations.json",
    "daily_counts.json",
];

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("artifacts serialize");
    bytes.push(b'\n');
    bytes
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl AnalysisRun {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            input_digest: self.input_digest.clone(),
            record_count: self.record_count,
            first_day: self.descriptive.first_day,
            last_day: self.descriptive.last_day,
            anomaly_count: self.anomalies.len(),
            recommendation_count: self.recommendations.len(),
        }
    }

    fn artifact_bytes(&self) -> Vec<(&'static str, Vec<u8>)> {
        let d = &self.descriptive;
        let bytes = [
            to_json(&self.config),
            to_json(&self.summary()),
            to_json(&d.aggregates),
            to_json(&d.baseline),
            to_json(&d.hourly),
            to_json(&d.ap_stats),
            to_json(&self.detection.features),
            to_json(&self.detection.model),
            to_json(&IforestScores {
                iforest_scores: self.detection.iforest_scores.clone(),
                dbscan_labels: self.detection.dbscan_labels.clone(),
            }),
            to_json(&self.detection.raw),
            to_json(&self.anomalies),
            to_json(&self.recommendations),
            to_json(&self.daily_anomaly_counts),
        ];
        ARTIFACTS.into_iter().zip(bytes).collect()
    }

    /// Writes every artifact, then the manifest, into `dir` (created if needed).
    pub fn write_dir(&self, dir: &Path) -> Result<Manifest, PipelineError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut artifacts = BTreeMap::new();
        for (name, bytes) in self.artifact_bytes() {
            let path = dir.join(name);
            fs::write(&path, &bytes).map_err(io_err(&path))?;
            artifacts.insert(name.to_string(), hex::encode(Sha256::digest(&bytes)));
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            run_id: self.run_id.clone(),
            created_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            digest_algorithm: DIGEST_ALGORITHM.to_string(),
            input_digest: self.input_digest.clone(),
            timings: self.timings.clone(),
            artifacts,
        };
        let path = dir.join(MANIFEST);
        fs::write(&path, to_json(&manifest)).map_err(io_err(&path))?;
        Ok(manifest)
    }

    pub fn read_dir(dir: &Path) -> Result<AnalysisRun, PipelineError> {
        let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
        let summary: RunSummary = read_json(&dir.join("summary.json"))?;
        let scores: IforestScores = read_json(&dir.join("scores.json"))?;
        let features: Vec<FeatureVector> = read_json(&dir.join("features.json"))?;
        let model: ForestModel = read_json(&dir.join("model.json"))?;
        let raw: Vec<RawDetection> = read_json(&dir.join("detections.json"))?;
        Ok(AnalysisRun {
            run_id: manifest.run_id,
            input_digest: summary.input_digest,
            record_count: summary.record_count,
            config: read_json(&dir.join("config.json"))?,
            descriptive: Descriptive {
                first_day: summary.first_day,
                last_day: summary.last_day,
                aggregates: read_json(&dir.join("aggregates.json"))?,
                baseline: read_json(&dir.join("baseline.json"))?,
                hourly: read_json(&dir.join("hourly.json"))?,
                ap_stats: read_json(&dir.join("ap_stats.json"))?,
            },
            detection: DetectionOutput {
                features,
                model,
                iforest_scores: scores.iforest_scores,
                dbscan_labels: scores.dbscan_labels,
                raw,
            },
            anomalies: read_json(&dir.join("anomalies.json"))?,
            recommendations: read_json(&dir.join("recommendations.json"))?,
            daily_anomaly_counts: read_json(&dir.join("daily_counts.json"))?,
            timings: manifest.timings,
        })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| PipelineError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Detection quality for one anomaly type (or overall).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    /// `None` for the overall row.
    #[serde(rename = "type")]
    pub kind: Option<AnomalyType>,
    pub injected: usize,
    pub recalled: usize,
    pub detected: usize,
    pub correct: usize,
    /// Absent when nothing was detected.
    pub precision: Option<f64>,
    /// Absent when nothing was injected.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_type: Vec<TypeScore>,
    pub overall: TypeScore,
}

impl Evaluation {
    pub fn get(&self, kind: AnomalyType) -> &TypeScore {
        self.per_type
            .iter()
            .find(|t| t.kind == Some(kind))
            .expect("every type has a row")
    }
}

fn matches(event: &AnomalyEvent, truth: &crate::simulator::InjectedAnomaly) -> bool {
    if event.kind != truth.kind || event.day != truth.day {
        return false;
    }
    if !truth.kind.is_device_scoped() {
        return true;
    }
    matches!(&event.target, Some(Target::Device(d)) if truth.devices.contains(d))
}

fn score(
    kind: Option<AnomalyType>,
    injected: usize,
    recalled: usize,
    detected: usize,
    correct: usize,
) -> TypeScore {
    TypeScore {
        kind,
        injected,
        recalled,
        detected,
        correct,
        precision: (detected > 0).then(|| correct as f64 / detected as f64),
        recall: (injected > 0).then(|| recalled as f64 / injected as f64),
    }
}

/// Scores detections against injected ground truth. An injection is
/// recalled when some event of its type falls on its day (naming one of its
/// devices, for device-scoped types); a detection is correct when it recalls
/// some injection.
pub fn evaluate(anomalies: &[AnomalyEvent], truth: &GroundTruth) -> Evaluation {
    let mut totals = (0, 0, 0, 0);
    let per_type = AnomalyType::ALL
        .iter()
        .map(|&kind| {
            let inj: Vec<_> = truth.injections.iter().filter(|i| i.kind == kind).collect();
            let det: Vec<_> = anomalies.iter().filter(|e| e.kind == kind).collect();
            let recalled = inj
                .iter()
                .filter(|i| det.iter().any(|e| matches(e, i)))
                .count();
            let correct = det
                .iter()
                .filter(|e| inj.iter().any(|i| matches(e, i)))
                .count();
            totals.0 += inj.len();
            totals.1 += recalled;
            totals.2 += det.len();
            totals.3 += correct;
            score(Some(kind), inj.len(), recalled, det.len(), correct)
        })
        .collect();
    Evaluation {
        per_type,
        overall: score(None, totals.0, totals.1, totals.2, totals.3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Detector, DeviceId, Evidence, Severity};
    use crate::simulator::InjectedAnomaly;

    fn day(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 4, n).unwrap()
    }

    fn event(kind: AnomalyType, d: u32, target: Option<Target>) -> AnomalyEvent {
        AnomalyEvent {
            id: AnomalyEvent::make_id(day(d), kind, target.as_ref()),
            day: day(d),
            kind,
            severity: Severity::Medium,
            score: 4.0,
            detector: Detector::Threshold,
            target,
            evidence: Evidence::default(),
        }
    }

    fn injected(kind: AnomalyType, d: u32, devices: Vec<DeviceId>) -> InjectedAnomaly {
        InjectedAnomaly {
            day: day(d),
            kind,
            devices,
            aps: Vec::new(),
            magnitude: 1.0,
        }
    }

    #[test]
    fn perfect_detection() {
        let truth = GroundTruth {
            injections: vec![injected(AnomalyType::AuthBurst, 9, vec![])],
        };
        let e = evaluate(&[event(AnomalyType::AuthBurst, 9, None)], &truth);
        assert_eq!(e.get(AnomalyType::AuthBurst).precision, Some(1.0));
        assert_eq!(e.get(AnomalyType::AuthBurst).recall, Some(1.0));
    }

    #[test]
    fn nothing_detected() {
        let truth = GroundTruth {
            injections: vec![injected(AnomalyType::DnsAnomaly, 9, vec![])],
        };
        let e = evaluate(&[], &truth);
        assert_eq!(e.get(AnomalyType::DnsAnomaly).recall, Some(0.0));
        assert_eq!(e.get(AnomalyType::DnsAnomaly).precision, None);
        assert_eq!(e.overall.precision, None);
    }

    #[test]
    fn two_of_three_with_one_spurious() {
        let truth = GroundTruth {
            injections: vec![
                injected(AnomalyType::AuthBurst, 8, vec![]),
                injected(AnomalyType::AuthBurst, 9, vec![]),
                injected(AnomalyType::AuthBurst, 10, vec![]),
            ],
        };
        let found = [
            event(AnomalyType::AuthBurst, 8, None),
            event(AnomalyType::AuthBurst, 10, None),
            event(AnomalyType::AuthBurst, 12, None),
        ];
        let s = evaluate(&found, &truth);
        let t = s.get(AnomalyType::AuthBurst);
        assert!((t.recall.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.precision.unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn device_scoped_types_need_the_device() {
        let a = DeviceId::from_bytes([1; 16]);
        let b = DeviceId::from_bytes([2; 16]);
        let truth = GroundTruth {
            injections: vec![injected(AnomalyType::DuplicateDevice, 9, vec![a])],
        };
        let wrong = [event(
            AnomalyType::DuplicateDevice,
            9,
            Some(Target::Device(b)),
        )];
        assert_eq!(
            evaluate(&wrong, &truth)
                .get(AnomalyType::DuplicateDevice)
                .recall,
            Some(0.0)
        );
        let right = [event(
            AnomalyType::DuplicateDevice,
            9,
            Some(Target::Device(a)),
        )];
        assert_eq!(
            evaluate(&right, &truth)
                .get(AnomalyType::DuplicateDevice)
                .recall,
            Some(1.0)
        );
    }

    #[test]
    fn window_below_five_is_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.detection.window = 4;
        assert!(matches!(
            cfg.validate(),
            Err(PipelineError::InvalidConfig(_))
        ));
    }
}
