use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use regex::Regex;
use tower::ServiceExt;
use wlan_cli::serve::{router, AppState};
use wlan_core::ingest::Salt;
use wlan_core::pipeline::{daily_counts, run_pipeline, AnalysisRun, PipelineConfig};
use wlan_core::simulator::{generate_month, SimConfig};
use wlan_core::{AnomalyEvent, AnomalyType, Detector, Evidence, Severity};

fn run() -> AnalysisRun {
    let salt = Salt::from_bytes([4; 16]);
    let mut cfg = SimConfig::default();
    cfg.apply_overrides("days = 10\nap_count = 25\nweekday_connections = 1500\nweekend_connections = 900\ndevice_pool = 3000")
        .unwrap();
    let m = generate_month(&cfg, 17, &salt).unwrap();
    run_pipeline(&m.session_records(&salt), &PipelineConfig::default()).unwrap()
}

fn with_anomalies(mut run: AnalysisRun, anomalies: Vec<AnomalyEvent>) -> AnalysisRun {
    run.anomalies = anomalies;
    run.recommendations.clear();
    run.daily_anomaly_counts = daily_counts(&run.descriptive, &run.anomalies);
    run
}

async fn get(state: &AppState, uri: &str) -> (StatusCode, String) {
    let resp = router(state.clone())
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(body.to_vec()).unwrap())
}

fn snapshot_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[tokio::test]
async fn clean_run_serves_empty_alerts() {
    let tmp = tempfile::tempdir().unwrap();
    with_anomalies(run(), vec![]).write_dir(tmp.path()).unwrap();
    let before = snapshot_files(tmp.path());
    let state = AppState::open(tmp.path()).unwrap();

    let (s, body) = get(&state, "/healthz").await;
    assert_eq!(s, StatusCode::OK);
    assert!(body.starts_with("ok "));

    let (s, body) = get(&state, "/alerts").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, "[]");

    let (s, body) = get(&state, "/metrics").await;
    assert_eq!(s, StatusCode::OK);
    assert!(body.contains("wlan_anomalies_total 0"));

    let (s, _) = get(&state, "/nope").await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    assert_eq!(snapshot_files(tmp.path()), before);
}

fn event(day: chrono::NaiveDate, i: usize, severity: Severity) -> AnomalyEvent {
    let target = Some(wlan_core::Target::Ap(
        wlan_core::ApId::new(&format!("AP-{}", 100 + i)).unwrap(),
    ));
    AnomalyEvent {
        id: AnomalyEvent::make_id(day, AnomalyType::ApOverload, target.as_ref()),
        day,
        kind: AnomalyType::ApOverload,
        severity,
        score: 1.0,
        detector: Detector::Rule,
        target,
        evidence: Evidence::default(),
    }
}

#[tokio::test]
async fn metrics_follow_the_exposition_grammar_and_count_alerts() {
    let base = run();
    let day = base.descriptive.aggregates[3].day;
    let events: Vec<_> = (0..6)
        .map(|i| {
            event(
                day,
                i,
                if i < 2 {
                    Severity::High
                } else {
                    Severity::Medium
                },
            )
        })
        .collect();
    let tmp = tempfile::tempdir().unwrap();
    with_anomalies(base, events).write_dir(tmp.path()).unwrap();
    let state = AppState::open(tmp.path()).unwrap();

    let (_, body) = get(&state, "/metrics").await;
    let line = Regex::new(r#"^[a-zA-Z_:][a-zA-Z0-9_:]*(\{[a-zA-Z_][a-zA-Z0-9_]*="[^"]*"(,[a-zA-Z_][a-zA-Z0-9_]*="[^"]*")*\})? -?[0-9.eE+-]+$"#).unwrap();
    for l in body
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
    {
        assert!(line.is_match(l), "bad exposition line: {l}");
    }
    assert!(body.contains(&format!("wlan_anomalies{{day=\"{day}\"}} 6")));
    assert!(body.contains("wlan_anomalies_total 6"));

    let (_, body) = get(&state, "/alerts").await;
    let all: Vec<AnomalyEvent> = serde_json::from_str(&body).unwrap();
    assert_eq!(all.len(), 6);
    let (_, body) = get(&state, "/alerts?min_severity=High").await;
    let high: Vec<AnomalyEvent> = serde_json::from_str(&body).unwrap();
    assert_eq!(high.len(), 2);
    let (_, body) = get(&state, &format!("/alerts?day={}", day.succ_opt().unwrap())).await;
    assert_eq!(body, "[]");
}

#[tokio::test]
async fn reload_swaps_in_a_rewritten_run() {
    let base = run();
    let day = base.descriptive.aggregates[0].day;
    let tmp = tempfile::tempdir().unwrap();
    with_anomalies(base.clone(), vec![])
        .write_dir(tmp.path())
        .unwrap();
    let state = AppState::open(tmp.path()).unwrap();
    assert!(!state.refresh());

    let mut next = with_anomalies(base, vec![event(day, 0, Severity::Low)]);
    next.run_id = format!("{}-next", next.run_id);
    next.write_dir(tmp.path()).unwrap();
    assert!(state.refresh());
    let (_, body) = get(&state, "/alerts").await;
    assert_eq!(
        serde_json::from_str::<Vec<AnomalyEvent>>(&body)
            .unwrap()
            .len(),
        1
    );
    assert!(get(&state, "/healthz").await.1.contains("-next"));
}
