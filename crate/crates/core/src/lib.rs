//! WLAN telemetry analytics: ingestion and anonymization of controller logs,
//! daily aggregation, anomaly detection, recommendations, a synthetic
//! campus simulator and the batch pipeline tying them together.

pub mod descriptive;
pub mod detection;
pub mod domain;
pub mod ingest;
pub mod overrides;
pub mod pipeline;
pub mod prescriptive;
pub mod report;
pub mod simulator;
pub mod stats;

pub use domain::*;
