use std::fs;

use wlan_core::ingest::Salt;
use wlan_core::pipeline::{
    daily_counts, describe, detect, evaluate, input_digest, prescribe, read_json, run_pipeline,
    select_days, AnalysisRun, Manifest, PipelineConfig, PipelineError, ARTIFACTS, MANIFEST,
};
use wlan_core::simulator::{generate_month, SimConfig, SimMonth};
use wlan_core::SessionRecord;

fn month(seed: u64) -> (SimMonth, Vec<SessionRecord>) {
    let salt = Salt::from_bytes([5; 16]);
    let mut cfg = SimConfig::default();
    cfg.apply_overrides("days = 14\nap_count = 30\nweekday_connections = 2000\nweekend_connections = 1400\ndevice_pool = 4000")
        .unwrap();
    let m = generate_month(&cfg, seed, &salt).unwrap();
    let records = m.session_records(&salt);
    (m, records)
}

#[test]
fn identical_inputs_give_identical_artifacts() {
    let (_, records) = month(21);
    let cfg = PipelineConfig::default();
    let a = run_pipeline(&records, &cfg).unwrap();
    let b = run_pipeline(&records, &cfg).unwrap();
    let da = tempfile::tempdir().unwrap();
    let db = tempfile::tempdir().unwrap();
    let ma = a.write_dir(da.path()).unwrap();
    let mb = b.write_dir(db.path()).unwrap();
    assert_eq!(ma.artifacts, mb.artifacts);
    assert_eq!(ma.input_digest, mb.input_digest);
    for name in ARTIFACTS {
        assert_eq!(
            fs::read(da.path().join(name)).unwrap(),
            fs::read(db.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn digest_ignores_record_order() {
    let (_, mut records) = month(22);
    let d = input_digest(&records);
    records.reverse();
    assert_eq!(input_digest(&records), d);
    records.pop();
    assert_ne!(input_digest(&records), d);
}

#[test]
fn stages_rerun_from_stored_inputs() {
    let (_, records) = month(23);
    let run = run_pipeline(&records, &PipelineConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = run.write_dir(dir.path()).unwrap();
    let stored = AnalysisRun::read_dir(dir.path()).unwrap();
    assert_eq!(stored, run);

    let on_disk: Manifest = read_json(&dir.path().join(MANIFEST)).unwrap();
    assert_eq!(on_disk, manifest);
    assert_eq!(on_disk.artifacts.len(), ARTIFACTS.len());

    let cfg = &stored.config;
    let (first, last, selected) = select_days(&records, cfg).unwrap();
    let desc = describe(&selected, first, last, cfg).unwrap();
    assert_eq!(desc, stored.descriptive);
    let (detection, anomalies) = detect(&selected, &stored.descriptive, cfg).unwrap();
    assert_eq!(detection, stored.detection);
    assert_eq!(anomalies, stored.anomalies);
    assert_eq!(
        prescribe(&stored.descriptive, &stored.anomalies, cfg),
        stored.recommendations
    );
    assert_eq!(
        daily_counts(&stored.descriptive, &stored.anomalies),
        stored.daily_anomaly_counts
    );
}

#[test]
fn evaluation_ignores_event_order() {
    let (m, records) = month(24);
    let run = run_pipeline(&records, &PipelineConfig::default()).unwrap();
    let base = evaluate(&run.anomalies, &m.truth);
    assert!(base.overall.injected > 0);

    let mut reversed = run.anomalies.clone();
    reversed.reverse();
    assert_eq!(evaluate(&reversed, &m.truth), base);

    let mut truth = m.truth.clone();
    truth.injections.reverse();
    assert_eq!(evaluate(&run.anomalies, &truth), base);
}

#[test]
fn short_inputs_are_rejected() {
    let (_, records) = month(25);
    let first = records[0].local_date();
    let few: Vec<SessionRecord> = records
        .into_iter()
        .filter(|r| (r.local_date() - first).num_days() < 5)
        .collect();
    assert!(matches!(
        run_pipeline(&few, &PipelineConfig::default()),
        Err(PipelineError::InsufficientDays { have: 5, need: 7 })
    ));
}
