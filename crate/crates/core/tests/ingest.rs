use std::io::{BufRead, Cursor};

use proptest::prelude::*;
use regex::Regex;
use wlan_core::ingest::{ingest_file, ingest_reader, IngestOptions, Salt, Strictness};
use wlan_core::pipeline::{run_pipeline, PipelineConfig};
use wlan_core::report::{metrics_exposition, render_report, Report};
use wlan_core::simulator::{generate_month, DeviceOutput, SimConfig};

fn salt() -> Salt {
    Salt::from_bytes(*b"ingest-test-salt")
}

fn small_config(days: usize) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.apply_overrides(&format!(
        "days = {days}\nap_count = 20\nweekday_connections = 600\nweekend_connections = 400\ndevice_pool = 1000\nhot_aps = 2"
    ))
    .unwrap();
    cfg
}

fn mac_regex() -> Regex {
    Regex::new(r"(?i)\b[0-9a-f]{2}(?:[:-][0-9a-f]{2}){5}\b").unwrap()
}

#[test]
fn simulated_file_is_accepted_line_for_line() {
    let month = generate_month(&small_config(8), 5, &salt()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.jsonl");
    let mut buf = Vec::new();
    month.write_jsonl(&mut buf, DeviceOutput::Mac).unwrap();
    std::fs::write(&path, &buf).unwrap();

    // independent count of non-blank lines
    let n = Cursor::new(&buf)
        .lines()
        .filter(|l| !l.as_ref().unwrap().trim().is_empty())
        .count();
    assert!(n > 1000);

    let (records, stats) = ingest_file(&path, Some(&salt()), &IngestOptions::default()).unwrap();
    assert_eq!(stats.accepted, n);
    assert_eq!(stats.skipped, 0);
    assert_eq!(records, month.session_records(&salt()));
}

#[test]
fn ingestion_is_order_preserving_and_idempotent() {
    let month = generate_month(&small_config(7), 9, &salt()).unwrap();
    let mut buf = Vec::new();
    month.write_jsonl(&mut buf, DeviceOutput::Mac).unwrap();
    let opts = IngestOptions::default();
    let (a, _) = ingest_reader(Cursor::new(&buf), Some(&salt()), &opts).unwrap();
    let (b, _) = ingest_reader(Cursor::new(&buf), Some(&salt()), &opts).unwrap();
    assert_eq!(a, b);
    let ts: Vec<_> = month.records.iter().map(|r| r.ts).collect();
    assert_eq!(a.iter().map(|r| r.ts).collect::<Vec<_>>(), ts);
}

#[test]
fn no_mac_survives_past_ingest() {
    let re = mac_regex();
    assert!(re.is_match("seen 02:1a:2b:3c:4d:5e on AP-1"));
    assert!(re.is_match("02-1A-2B-3C-4D-5E"));
    assert!(!re.is_match("00112233445566778899aabbccddeeff"));

    let month = generate_month(&small_config(8), 11, &salt()).unwrap();
    let mut raw = Vec::new();
    month.write_jsonl(&mut raw, DeviceOutput::Mac).unwrap();
    assert!(
        re.is_match(std::str::from_utf8(&raw).unwrap()),
        "input should carry MACs"
    );

    let (records, _) =
        ingest_reader(Cursor::new(&raw), Some(&salt()), &IngestOptions::default()).unwrap();
    let mut out = Vec::new();
    wlan_core::ingest::write_jsonl(&records, &mut out).unwrap();
    assert!(!re.is_match(std::str::from_utf8(&out).unwrap()));

    let run = run_pipeline(&records, &PipelineConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.write_dir(dir.path()).unwrap();
    render_report(&run).write_to(dir.path()).unwrap();
    std::fs::write(dir.path().join("metrics.txt"), metrics_exposition(&run)).unwrap();
    let mut scanned = 0;
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!re.is_match(&text), "MAC found in {}", path.display());
        scanned += 1;
    }
    assert!(scanned >= 14 + Report::FILES.len());
}

fn line() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(r#"{"ts":"2025-04-07T15:00:00Z","device":"02:00:00:00:00:01","ap":"AP-104","kind":"assoc"}"#.to_string()),
        Just(r#"{"ts":"2025-04-07T15:00:00Z","device":"02:00:00:00:00:01","ap":"AP-104","kind":"disassoc","session_minutes":12.5}"#.to_string()),
        Just(r#"{"ts":"2025-04-07T15:00:00Z","device":"02:00:00:00:00:01","ap":"bad","kind":"assoc"}"#.to_string()),
        Just(r#"{"ts":"2025-04-07T15:00:00Z","device":"not-a-mac","ap":"AP-1","kind":"assoc"}"#.to_string()),
        Just(r#"{"ts":"2025-04-07T15:00:00Z","device":"02:00:00:00:00:01","ap":"AP-1","kind":"teleport"}"#.to_string()),
        Just("{ not json".to_string()),
        Just(String::new()),
        "[a-z ]{0,12}",
    ]
}

proptest! {
    #[test]
    fn accepted_plus_skipped_is_lines_read(lines in prop::collection::vec(line(), 0..40)) {
        let text = lines.join("\n");
        let opts = IngestOptions { strictness: Strictness::Lenient, ..IngestOptions::default() };
        let (records, stats) = ingest_reader(Cursor::new(text.as_bytes()), Some(&salt()), &opts).unwrap();
        prop_assert_eq!(stats.accepted + stats.skipped, stats.lines_read);
        prop_assert_eq!(records.len(), stats.accepted);
        prop_assert_eq!(stats.errors.values().sum::<usize>(), stats.skipped);
        let non_blank = lines.iter().filter(|l| !l.trim().is_empty()).count();
        prop_assert_eq!(stats.lines_read, non_blank);
    }
}
