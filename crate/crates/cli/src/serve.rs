//! Read-only HTTP view of a run directory.
//!
//! The loaded run is swapped atomically when the directory's manifest changes,
//! so a `run --out` into the same directory is picked up without a restart.
//! Nothing here writes to the run directory.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use wlan_core::pipeline::{AnalysisRun, MANIFEST};
use wlan_core::report::metrics_exposition;
use wlan_core::{AnomalyEvent, Severity};

use crate::CliError;

/// What the endpoints serve; rebuilt whole on every reload.
#[derive(Debug)]
pub struct Snapshot {
    pub run_id: String,
    pub manifest_hash: String,
    pub metrics: String,
    pub anomalies: Vec<AnomalyEvent>,
}

impl Snapshot {
    pub fn load(dir: &Path) -> Result<Snapshot, CliError> {
        let manifest_hash = manifest_hash(dir)?;
        let run = AnalysisRun::read_dir(dir).map_err(|e| CliError::Input(e.to_string()))?;
        Ok(Snapshot {
            run_id: run.run_id.clone(),
            manifest_hash,
            metrics: metrics_exposition(&run),
            anomalies: run.anomalies,
        })
    }
}

fn manifest_hash(dir: &Path) -> Result<String, CliError> {
    let path = dir.join(MANIFEST);
    let bytes =
        std::fs::read(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone)]
pub struct AppState {
    pub dir: PathBuf,
    pub snapshot: Arc<RwLock<Arc<Snapshot>>>,
}

impl AppState {
    pub fn open(dir: &Path) -> Result<AppState, CliError> {
        let snap = Snapshot::load(dir)?;
        Ok(AppState {
            dir: dir.to_path_buf(),
            snapshot: Arc::new(RwLock::new(Arc::new(snap))),
        })
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Reloads if the manifest changed. A half-written run fails to load and
    /// the previous snapshot stays in place; returns whether a swap happened.
    pub fn refresh(&self) -> bool {
        let Ok(hash) = manifest_hash(&self.dir) else {
            return false;
        };
        if hash == self.current().manifest_hash {
            return false;
        }
        match Snapshot::load(&self.dir) {
            Ok(snap) if snap.manifest_hash == hash => {
                *self.snapshot.write().expect("snapshot lock") = Arc::new(snap);
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct AlertQuery {
    /// Only alerts at or above this severity (`Low`, `Medium`, `High`).
    pub min_severity: Option<Severity>,
    pub day: Option<NaiveDate>,
}

async fn metrics(State(state): State<AppState>) -> Response {
    let snap = state.current();
    (
        [(
            header::CONTENT_TYPE,
            "text/plain; version=0.0.4; charset=utf-8",
        )],
        snap.metrics.clone(),
    )
        .into_response()
}

async fn alerts(
    State(state): State<AppState>,
    Query(q): Query<AlertQuery>,
) -> Json<Vec<AnomalyEvent>> {
    let snap = state.current();
    let out = snap
        .anomalies
        .iter()
        .filter(|a| q.min_severity.is_none_or(|s| a.severity >= s))
        .filter(|a| q.day.is_none_or(|d| a.day == d))
        .cloned()
        .collect();
    Json(out)
}

async fn healthz(State(state): State<AppState>) -> impl IntoResponse {
    (StatusCode::OK, format!("ok {}\n", state.current().run_id))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/metrics", get(metrics))
        .route("/alerts", get(alerts))
        .route("/healthz", get(healthz))
        .with_state(state)
}

pub async fn serve(
    dir: &Path,
    addr: SocketAddr,
    poll: Duration,
    quiet: bool,
) -> Result<(), CliError> {
    let state = AppState::open(dir)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::Internal(format!("binding {addr}: {e}")))?;
    if !quiet {
        let bound = listener.local_addr().unwrap_or(addr);
        eprintln!("serving run {} on http://{bound}", state.current().run_id);
    }
    let poller = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(poll.max(Duration::from_millis(50)));
        loop {
            tick.tick().await;
            let st = poller.clone();
            let swapped = tokio::task::spawn_blocking(move || st.refresh())
                .await
                .unwrap_or(false);
            if swapped && !quiet {
                eprintln!("reloaded run {}", poller.current().run_id);
            }
        }
    });
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Internal(format!("server: {e}")))
}

pub fn serve_blocking(
    dir: &Path,
    addr: SocketAddr,
    poll: Duration,
    quiet: bool,
) -> Result<(), CliError> {
    let rt =
        tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(format!("runtime: {e}")))?;
    rt.block_on(serve(dir, addr, poll, quiet))
}
