//! Report rendering for a sealed [`AnalysisRun`]: a JSON document, the two
//! CSV tables, a static single-file HTML page, a plain-text recommendation
//! section and the line-oriented metrics exposition served by `/metrics`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::descriptive::ApStats;
use crate::domain::{AnomalyEvent, DailyAggregate, Recommendation};
use crate::pipeline::{AnalysisRun, RunSummary};
use crate::prescriptive::flag_aps;

pub const METRICS_CSV_HEADER: [&str; 4] =
    ["Métrica", "Promedio Diario", "Valor Mínimo", "Valor Máximo"];
pub const AP_CSV_HEADER: [&str; 5] = [
    "ID del AP",
    "Conexiones Mensuales",
    "Latencia Promedio (ms)",
    "Pérdida de Paquetes (%)",
    "Observaciones",
];

/// Rows shown in the HTML top-APs table.
pub const TOP_APS: usize = 10;

/// One row of the key-metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub key: String,
    pub label: String,
    pub daily_mean: f64,
    pub min: f64,
    pub max: f64,
}

/// One row of the AP table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApRow {
    pub ap: String,
    pub monthly_connections: u64,
    pub mean_latency_ms: Option<f64>,
    pub mean_loss_pct: Option<f64>,
    pub peak_concurrent: u64,
    pub overloaded_days: u64,
    pub flagged: bool,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyPoint {
    pub day: NaiveDate,
    pub connections: u64,
    pub traffic_gb: f64,
    pub anomalies: usize,
}

/// The JSON report document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub run_id: String,
    pub summary: RunSummary,
    pub metrics: Vec<MetricRow>,
    pub aps: Vec<ApRow>,
    pub daily: Vec<DailyPoint>,
    pub hourly: Vec<f64>,
    pub peak_hour: usize,
    pub anomalies: Vec<AnomalyEvent>,
    pub recommendations: Vec<Recommendation>,
}

/// Every rendered document, as text.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub json: String,
    pub metrics_csv: String,
    pub ap_csv: String,
    pub html: String,
    pub recommendations_txt: String,
}

impl Report {
    pub const FILES: [&'static str; 5] = [
        "report.json",
        "metrics.csv",
        "aps.csv",
        "report.html",
        "recommendations.txt",
    ];

    /// Writes the documents into `dir`, returning the paths written.
    pub fn write_to(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let bodies = [
            &self.json,
            &self.metrics_csv,
            &self.ap_csv,
            &self.html,
            &self.recommendations_txt,
        ];
        let mut out = Vec::new();
        for (name, body) in Self::FILES.iter().zip(bodies) {
            let path = dir.join(name);
            fs::write(&path, body)?;
            out.push(path);
        }
        Ok(out)
    }
}

fn stat_row(key: &str, label: &str, values: impl Iterator<Item = f64>) -> MetricRow {
    let values: Vec<f64> = values.collect();
    let (mean, min, max) = if values.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            values.iter().sum::<f64>() / values.len() as f64,
            values.iter().copied().fold(f64::INFINITY, f64::min),
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    MetricRow {
        key: key.to_string(),
        label: label.to_string(),
        daily_mean: mean,
        min,
        max,
    }
}

/// Key metrics over the run's days, in table order.
pub fn metric_rows(
    aggregates: &[DailyAggregate],
    daily_counts: &BTreeMap<NaiveDate, usize>,
) -> Vec<MetricRow> {
    let a = aggregates;
    vec![
        stat_row(
            "connections",
            "Usuarios activos (conexiones totales)",
            a.iter().map(|d| d.connections as f64),
        ),
        stat_row(
            "mean_session_minutes",
            "Duración promedio de sesión (minutos)",
            a.iter().map(|d| d.mean_session_minutes),
        ),
        stat_row(
            "auth_failures",
            "Intentos fallidos de conexión",
            a.iter().map(|d| d.auth_failures as f64),
        ),
        stat_row(
            "traffic_gb",
            "Tráfico total (GB/día)",
            a.iter().map(|d| d.traffic_gb),
        ),
        stat_row(
            "overload_pct",
            "% de puntos de acceso sobrecargados",
            a.iter().map(|d| d.overload_pct),
        ),
        stat_row(
            "anomalies",
            "Anomalías detectadas",
            daily_counts.values().map(|&n| n as f64),
        ),
    ]
}

/// AP rows sorted by monthly connections descending, then id.
pub fn ap_rows(run: &AnalysisRun) -> Vec<ApRow> {
    let p = &run.config.prescriptive;
    let stats = &run.descriptive.ap_stats;
    let flagged = flag_aps(stats, p.latency_bound_ms, p.loss_bound_pct, p.flag_rule);
    let mut rows: Vec<ApRow> = stats
        .iter()
        .map(|s| {
            let is_flagged = flagged.contains(&s.ap);
            ApRow {
                ap: s.ap.to_string(),
                monthly_connections: s.monthly_connections,
                mean_latency_ms: s.mean_latency_ms,
                mean_loss_pct: s.mean_loss_pct,
                peak_concurrent: s.peak_concurrent,
                overloaded_days: s.overloaded_days,
                flagged: is_flagged,
                notes: ap_notes(s, is_flagged, run.config.aggregate.overload_threshold),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.monthly_connections
            .cmp(&a.monthly_connections)
            .then_with(|| a.ap.cmp(&b.ap))
    });
    rows
}

fn ap_notes(s: &ApStats, flagged: bool, threshold: u32) -> String {
    let mut notes = Vec::new();
    if flagged {
        notes.push("candidato a reajuste de canal o redistribución de carga".to_string());
    }
    if s.overloaded_days > 0 {
        notes.push(format!(
            "sobrecarga (>{threshold} clientes) en {} días",
            s.overloaded_days
        ));
    }
    if s.mean_latency_ms.is_none() {
        notes.push("sin muestras de salud".to_string());
    }
    notes.join("; ")
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map(|x| format!("{x:.decimals$}")).unwrap_or_default()
}

fn csv_string(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for row in rows {
        w.write_record(&row).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    csv_string(
        &METRICS_CSV_HEADER,
        rows.iter().map(|r| {
            vec![
                r.label.clone(),
                format!("{:.1}", r.daily_mean),
                format!("{:.1}", r.min),
                format!("{:.1}", r.max),
            ]
        }),
    )
}

pub fn ap_csv(rows: &[ApRow]) -> String {
    csv_string(
        &AP_CSV_HEADER,
        rows.iter().map(|r| {
            vec![
                r.ap.clone(),
                r.monthly_connections.to_string(),
                opt(r.mean_latency_ms, 1),
                opt(r.mean_loss_pct, 2),
                r.notes.clone(),
            ]
        }),
    )
}

/// Plain-text recommendation section.
pub fn recommendations_text(recs: &[Recommendation]) -> String {
    if recs.is_empty() {
        return "No recommendations.\n".to_string();
    }
    let mut out = String::new();
    for (i, r) in recs.iter().enumerate() {
        let _ = writeln!(out, "{}. {:?} on {}", i + 1, r.action, r.target);
        let _ = writeln!(out, "   {}", r.rationale);
        if !r.linked_events.is_empty() {
            let _ = writeln!(out, "   linked: {}", r.linked_events.join(", "));
        }
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Inline SVG polyline chart of one or more series sharing an x axis.
fn svg_lines(title: &str, labels: &[String], series: &[(&str, &str, Vec<f64>)]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 220.0;
    const PAD: f64 = 30.0;
    let n = labels.len().max(2);
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (n - 1) as f64;
    let mut svg = format!(
        "<figure><figcaption>{}</figcaption><svg viewBox=\"0 0 {W} {H}\" width=\"{W}\" height=\"{H}\" role=\"img\">\n",
        escape(title)
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999\"/>",
        H - PAD,
        W - PAD,
        H - PAD
    );
    for (name, color, values) in series {
        let max = values.iter().copied().fold(0.0_f64, f64::max);
        let scale = if max > 0.0 {
            (H - 2.0 * PAD) / max
        } else {
            0.0
        };
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.1},{:.1}", x(i), H - PAD - v * scale))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"><title>{} (max {max:.1})</title></polyline>",
            points.join(" "),
            escape(name)
        );
    }
    if let (Some(first), Some(last)) = (labels.first(), labels.last()) {
        let _ = writeln!(
            svg,
            "<text x=\"{PAD}\" y=\"{}\" font-size=\"11\">{}</text><text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            H - 8.0,
            escape(first),
            W - PAD,
            H - 8.0,
            escape(last)
        );
    }
    let legend: Vec<String> = series
        .iter()
        .map(|(name, color, _)| {
            format!(
                "<span style=\"color:{color}\">&#9632; {}</span>",
                escape(name)
            )
        })
        .collect();
    let _ = writeln!(svg, "</svg><div>{}</div></figure>", legend.join(" "));
    svg
}

fn html_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut t = String::from("<table>\n<tr>");
    for h in header {
        let _ = write!(t, "<th>{}</th>", escape(h));
    }
    t.push_str("</tr>\n");
    for row in rows {
        t.push_str("<tr>");
        for cell in row {
            let _ = write!(t, "<td>{}</td>", escape(&cell));
        }
        t.push_str("</tr>\n");
    }
    t.push_str("</table>\n");
    t
}

fn html(doc: &ReportDoc) -> String {
    let mut h = String::new();
    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html lang=\"es\">\n<head>\n<meta charset=\"utf-8\">\n<title>WLAN report {}</title>\n\
         <style>body{{font-family:sans-serif;max-width:960px;margin:auto}}table{{border-collapse:collapse;margin:1em 0}}\
         td,th{{border:1px solid #ccc;padding:2px 6px;font-size:13px}}th{{background:#eee}}</style>\n</head>\n<body>\n",
        escape(&doc.run_id)
    );
    let s = &doc.summary;
    let _ = writeln!(
        h,
        "<h1>WLAN analytics report</h1>\n<p>{} to {}, {} records, input digest <code>{}</code></p>",
        s.first_day, s.last_day, s.record_count, s.input_digest
    );

    h.push_str("<h2>Key metrics</h2>\n");
    h.push_str(&html_table(
        &METRICS_CSV_HEADER,
        doc.metrics.iter().map(|r| {
            vec![
                r.label.clone(),
                format!("{:.1}", r.daily_mean),
                format!("{:.1}", r.min),
                format!("{:.1}", r.max),
            ]
        }),
    ));

    h.push_str("<h2>Daily series</h2>\n");
    let labels: Vec<String> = doc.daily.iter().map(|d| d.day.to_string()).collect();
    h.push_str(&svg_lines(
        "Connections and traffic per day (each scaled to its own maximum)",
        &labels,
        &[
            (
                "connections",
                "#1f77b4",
                doc.daily.iter().map(|d| d.connections as f64).collect(),
            ),
            (
                "traffic GB",
                "#d62728",
                doc.daily.iter().map(|d| d.traffic_gb).collect(),
            ),
        ],
    ));

    h.push_str("<h2>Hourly profile</h2>\n");
    let hours: Vec<String> = (0..24).map(|i| format!("{i:02}:00")).collect();
    h.push_str(&svg_lines(
        &format!(
            "Mean open sessions at the top of each hour (peak {:02}:00)",
            doc.peak_hour
        ),
        &hours,
        &[("open sessions", "#2ca02c", doc.hourly.clone())],
    ));

    h.push_str("<h2>Top access points</h2>\n");
    h.push_str(&html_table(
        &AP_CSV_HEADER,
        doc.aps.iter().take(TOP_APS).map(|r| {
            vec![
                r.ap.clone(),
                r.monthly_connections.to_string(),
                opt(r.mean_latency_ms, 1),
                opt(r.mean_loss_pct, 2),
                r.notes.clone(),
            ]
        }),
    ));

    let _ = writeln!(h, "<h2>Anomalies ({})</h2>", doc.anomalies.len());
    if doc.anomalies.is_empty() {
        h.push_str("<p>No anomalies detected.</p>\n");
    } else {
        h.push_str(&html_table(
            &["id", "type", "severity", "detector", "score", "evidence"],
            doc.anomalies.iter().map(|e| {
                vec![
                    e.id.clone(),
                    e.kind.to_string(),
                    format!("{:?}", e.severity),
                    format!("{:?}", e.detector),
                    format!("{:.3}", e.score),
                    e.evidence.note.clone(),
                ]
            }),
        ));
    }

    let _ = writeln!(
        h,
        "<h2>Recommendations ({})</h2>",
        doc.recommendations.len()
    );
    if doc.recommendations.is_empty() {
        h.push_str("<p>No recommendations.</p>\n");
    } else {
        h.push_str(&html_table(
            &["target", "action", "rationale", "linked events"],
            doc.recommendations.iter().map(|r| {
                vec![
                    r.target.to_string(),
                    format!("{:?}", r.action),
                    r.rationale.clone(),
                    r.linked_events.len().to_string(),
                ]
            }),
        ));
    }
    h.push_str("</body>\n</html>\n");
    h
}

pub fn report_doc(run: &AnalysisRun) -> ReportDoc {
    let d = &run.descriptive;
    ReportDoc {
        run_id: run.run_id.clone(),
        summary: run.summary(),
        metrics: metric_rows(&d.aggregates, &run.daily_anomaly_counts),
        aps: ap_rows(run),
        daily: d
            .aggregates
            .iter()
            .map(|a| DailyPoint {
                day: a.day,
                connections: a.connections,
                traffic_gb: a.traffic_gb,
                anomalies: run.daily_anomaly_counts.get(&a.day).copied().unwrap_or(0),
            })
            .collect(),
        hourly: d.hourly.buckets.to_vec(),
        peak_hour: d.hourly.peak_hour(),
        anomalies: run.anomalies.clone(),
        recommendations: run.recommendations.clone(),
    }
}

pub fn render_report(run: &AnalysisRun) -> Report {
    let doc = report_doc(run);
    Report {
        json: serde_json::to_string_pretty(&doc).expect("report serializes") + "\n",
        metrics_csv: metrics_csv(&doc.metrics),
        ap_csv: ap_csv(&doc.aps),
        html: html(&doc),
        recommendations_txt: recommendations_text(&doc.recommendations),
    }
}

fn label_value(v: &str) -> String {
    v.replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', "\\n")
}

struct Exposition(String);

impl Exposition {
    fn line(&mut self, name: &str, labels: &[(&str, &str)], value: f64) {
        if !value.is_finite() {
            return;
        }
        self.0.push_str(name);
        if !labels.is_empty() {
            let parts: Vec<String> = labels
                .iter()
                .map(|(k, v)| format!("{k}=\"{}\"", label_value(v)))
                .collect();
            let _ = write!(self.0, "{{{}}}", parts.join(","));
        }
        let _ = writeln!(self.0, " {value}");
    }
}

/// Line-oriented metrics exposition: one `name{labels} value` per line.
pub fn metrics_exposition(run: &AnalysisRun) -> String {
    let mut e = Exposition(String::new());
    let d = &run.descriptive;
    e.line("wlan_records", &[], run.record_count as f64);
    e.line("wlan_days", &[], d.aggregates.len() as f64);
    for a in &d.aggregates {
        let day = a.day.to_string();
        let l = [("day", day.as_str())];
        e.line("wlan_connections", &l, a.connections as f64);
        e.line("wlan_distinct_devices", &l, a.distinct_devices as f64);
        e.line("wlan_mean_session_minutes", &l, a.mean_session_minutes);
        e.line("wlan_auth_failures", &l, a.auth_failures as f64);
        e.line(
            "wlan_unexpected_disconnects",
            &l,
            a.unexpected_disconnects as f64,
        );
        e.line("wlan_traffic_gb", &l, a.traffic_gb);
        e.line("wlan_overload_pct", &l, a.overload_pct);
        e.line(
            "wlan_duplicate_device_events",
            &l,
            a.duplicate_device_events as f64,
        );
    }
    for (h, v) in d.hourly.buckets.iter().enumerate() {
        e.line("wlan_hourly_open_sessions", &[("hour", &h.to_string())], *v);
    }
    for s in &d.ap_stats {
        let ap = s.ap.to_string();
        let l = [("ap", ap.as_str())];
        e.line("wlan_ap_connections", &l, s.monthly_connections as f64);
        e.line("wlan_ap_peak_concurrent", &l, s.peak_concurrent as f64);
        e.line("wlan_ap_overloaded_days", &l, s.overloaded_days as f64);
        if let Some(v) = s.mean_latency_ms {
            e.line("wlan_ap_latency_ms", &l, v);
        }
        if let Some(v) = s.mean_loss_pct {
            e.line("wlan_ap_loss_pct", &l, v);
        }
    }
    for (day, n) in &run.daily_anomaly_counts {
        e.line("wlan_anomalies", &[("day", &day.to_string())], *n as f64);
    }
    let mut by_type: BTreeMap<(String, String), usize> = BTreeMap::new();
    for a in &run.anomalies {
        *by_type
            .entry((a.kind.to_string(), format!("{:?}", a.severity)))
            .or_default() += 1;
    }
    for ((kind, severity), n) in &by_type {
        e.line(
            "wlan_anomalies_by_type",
            &[("type", kind), ("severity", severity)],
            *n as f64,
        );
    }
    e.line("wlan_anomalies_total", &[], run.anomalies.len() as f64);
    e.line(
        "wlan_recommendations_total",
        &[],
        run.recommendations.len() as f64,
    );
    e.0
}

fn ratio(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}"))
        .unwrap_or_else(|| "-".to_string())
}

/// Fixed-width precision/recall table, one row per type then the total.
pub fn evaluation_table(eval: &crate::pipeline::Evaluation) -> String {
    let mut out = format!(
        "{:<24} {:>8} {:>8} {:>8} {:>8} {:>9} {:>7}\n",
        "type", "injected", "recalled", "detected", "correct", "precision", "recall"
    );
    let rows = eval.per_type.iter().chain(std::iter::once(&eval.overall));
    for t in rows {
        let name = t.kind.map_or("overall", |k| k.name());
        let _ = writeln!(
            out,
            "{:<24} {:>8} {:>8} {:>8} {:>8} {:>9} {:>7}",
            name,
            t.injected,
            t.recalled,
            t.detected,
            t.correct,
            ratio(t.precision),
            ratio(t.recall)
        );
    }
    out
}
