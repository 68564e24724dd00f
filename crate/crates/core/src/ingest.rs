//! Controller log ingestion: streaming JSONL/CSV parsing, MAC anonymization
//! and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use hmac::{Hmac, Mac};
use rayon::prelude::*;
use serde::Serialize;
use sha2::Sha256;
use thiserror::Error;

use crate::domain::{validate, DeviceId, ObservationWindow, RawRecord, SessionRecord};

/// Environment variable holding the anonymization salt as 32 hex characters.
pub const SALT_ENV: &str = "WLC_SALT_HEX";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line_no}: {reason}")]
    MalformedLine { line_no: usize, reason: String },
    /// The offending text is not echoed back; it may still identify a device.
    #[error("device is not a MAC address of six colon-separated hex octets")]
    InvalidMacFormat,
    #[error("invalid salt: {0}")]
    InvalidSalt(String),
}

/// Secret key for device anonymization. Deliberately not serializable and
/// redacted from `Debug`.
#[derive(Clone, PartialEq, Eq)]
pub struct Salt([u8; 16]);

impl Salt {
    pub const fn from_bytes(bytes: [u8; 16]) -> Self {
        Salt(bytes)
    }

    pub fn from_hex(text: &str) -> Result<Self, IngestError> {
        let text = text.trim();
        let mut out = [0u8; 16];
        hex::decode_to_slice(text, &mut out)
            .map_err(|e| IngestError::InvalidSalt(format!("expected 32 hex characters ({e})")))?;
        Ok(Salt(out))
    }

    /// Reads a salt file holding either 32 hex characters or exactly 16 raw bytes.
    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let bytes = std::fs::read(path)?;
        if bytes.len() == 16 {
            let mut out = [0u8; 16];
            out.copy_from_slice(&bytes);
            return Ok(Salt(out));
        }
        let text = std::str::from_utf8(&bytes).map_err(|_| {
            IngestError::InvalidSalt("salt file is neither 16 bytes nor hex text".into())
        })?;
        Salt::from_hex(text)
    }

    /// `Ok(None)` when the variable is unset.
    pub fn from_env() -> Result<Option<Self>, IngestError> {
        match std::env::var(SALT_ENV) {
            Ok(v) => Salt::from_hex(&v).map(Some),
            Err(std::env::VarError::NotPresent) => Ok(None),
            Err(e) => Err(IngestError::InvalidSalt(e.to_string())),
        }
    }
}

impl fmt::Debug for Salt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Salt(<redacted>)")
    }
}

fn normalize_mac(mac: &str) -> Option<String> {
    let lower = mac.trim().to_ascii_lowercase();
    let octets: Vec<&str> = lower.split(':').collect();
    let ok = octets.len() == 6
        && octets
            .iter()
            .all(|o| o.len() == 2 && o.bytes().all(|b| b.is_ascii_hexdigit()));
    ok.then_some(lower)
}

/// Keyed one-way digest of the lowercase MAC: HMAC-SHA256 truncated to 16 bytes.
pub fn anonymize_device(mac: &str, salt: &Salt) -> Result<DeviceId, IngestError> {
    let normalized = normalize_mac(mac).ok_or(IngestError::InvalidMacFormat)?;
    let mut hmac = Hmac::<Sha256>::new_from_slice(&salt.0).expect("hmac accepts any key length");
    hmac.update(normalized.as_bytes());
    let digest = hmac.finalize().into_bytes();
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    Ok(DeviceId::from_bytes(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    /// `.csv` selects CSV, anything else JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Abort on the first bad line.
    Strict,
    /// Skip bad lines and count them.
    #[default]
    Lenient,
}

/// One decoded line and its 1-based line number in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLine {
    pub line_no: usize,
    pub record: RawRecord,
}

/// Streams raw records out of `reader` in file order. Blank lines are ignored.
/// Memory use is bounded by the longest line.
pub fn parse_session_log<'a, R: BufRead + 'a>(
    reader: R,
    format: InputFormat,
) -> Box<dyn Iterator<Item = Result<RawLine, IngestError>> + 'a> {
    match format {
        InputFormat::Jsonl => Box::new(reader.lines().enumerate().filter_map(|(idx, line)| {
            let line_no = idx + 1;
            match line {
                Err(e) => Some(Err(IngestError::Io(e))),
                Ok(text) if text.trim().is_empty() => None,
                Ok(text) => Some(
                    serde_json::from_str::<RawRecord>(&text)
                        .map(|record| RawLine { line_no, record })
                        .map_err(|e| IngestError::MalformedLine {
                            line_no,
                            reason: e.to_string(),
                        }),
                ),
            }
        })),
        InputFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(true)
                .trim(csv::Trim::All)
                .from_reader(reader);
            let headers = match rdr.headers() {
                Ok(h) => h.clone(),
                Err(e) => return Box::new(std::iter::once(Err(csv_error(e)))),
            };
            Box::new(rdr.into_records().map(move |row| {
                let row = row.map_err(csv_error)?;
                let line_no = row.position().map_or(0, |p| p.line() as usize);
                row.deserialize::<RawRecord>(Some(&headers))
                    .map(|record| RawLine { line_no, record })
                    .map_err(|e| IngestError::MalformedLine {
                        line_no,
                        reason: e.to_string(),
                    })
            }))
        }
    }
}

fn csv_error(e: csv::Error) -> IngestError {
    let line_no = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::MalformedLine {
            line_no,
            reason: format!("{other:?}"),
        },
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub lines_read: usize,
    pub accepted: usize,
    pub skipped: usize,
    /// Skipped lines bucketed by error label.
    pub errors: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub format: Option<InputFormat>,
    pub strictness: Strictness,
    /// `device` already holds 32-hex ids; no MAC is expected.
    pub pre_anonymized: bool,
    pub window: Option<ObservationWindow>,
}

fn process_line(
    mut line: RawLine,
    salt: Option<&Salt>,
    opts: &IngestOptions,
) -> Result<SessionRecord, (String, IngestError)> {
    if !opts.pre_anonymized {
        let salt = salt.ok_or_else(|| {
            (
                "no_salt".to_string(),
                IngestError::InvalidSalt("raw MAC input requires a salt".into()),
            )
        })?;
        let id = anonymize_device(&line.record.device, salt).map_err(|e| {
            (
                "invalid_mac".to_string(),
                IngestError::MalformedLine {
                    line_no: line.line_no,
                    reason: e.to_string(),
                },
            )
        })?;
        line.record.device = id.to_string();
    }
    validate(&line.record, opts.window.as_ref()).map_err(|e| {
        (
            e.label(),
            IngestError::MalformedLine {
                line_no: line.line_no,
                reason: e.to_string(),
            },
        )
    })
}

/// parse → anonymize → validate over any reader.
pub fn ingest_reader<R: BufRead>(
    reader: R,
    salt: Option<&Salt>,
    opts: &IngestOptions,
) -> Result<(Vec<SessionRecord>, IngestStats), IngestError> {
    let format = opts.format.unwrap_or(InputFormat::Jsonl);
    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    for item in parse_session_log(reader, format) {
        let outcome = match item {
            Err(IngestError::MalformedLine { line_no, reason }) => Err((
                "parse".to_string(),
                IngestError::MalformedLine { line_no, reason },
            )),
            Err(other) => return Err(other),
            Ok(line) => process_line(line, salt, opts),
        };
        stats.lines_read += 1;
        match outcome {
            Ok(rec) => {
                stats.accepted += 1;
                records.push(rec);
            }
            Err((_, err @ IngestError::InvalidSalt(_))) => return Err(err),
            Err((label, err)) => {
                if opts.strictness == Strictness::Strict {
                    return Err(err);
                }
                stats.skipped += 1;
                *stats.errors.entry(label).or_default() += 1;
            }
        }
    }
    Ok((records, stats))
}

pub fn ingest_file(
    path: &Path,
    salt: Option<&Salt>,
    opts: &IngestOptions,
) -> Result<(Vec<SessionRecord>, IngestStats), IngestError> {
    let file = File::open(path)?;
    let opts = IngestOptions {
        format: Some(opts.format.unwrap_or_else(|| InputFormat::from_path(path))),
        ..opts.clone()
    };
    ingest_reader(BufReader::with_capacity(1 << 16, file), salt, &opts)
}

/// Ingests several files concurrently; results are concatenated in the given
/// path order and stats summed.
pub fn ingest_files(
    paths: &[&Path],
    salt: Option<&Salt>,
    opts: &IngestOptions,
) -> Result<(Vec<SessionRecord>, IngestStats), IngestError> {
    let parts: Vec<_> = paths
        .par_iter()
        .map(|p| ingest_file(p, salt, opts))
        .collect::<Result<_, _>>()?;
    let mut records = Vec::new();
    let mut stats = IngestStats::default();
    for (recs, s) in parts {
        records.extend(recs);
        stats.lines_read += s.lines_read;
        stats.accepted += s.accepted;
        stats.skipped += s.skipped;
        for (k, v) in s.errors {
            *stats.errors.entry(k).or_default() += v;
        }
    }
    Ok((records, stats))
}

/// Writes records in the canonical JSONL format, one line each.
pub fn write_jsonl<W: Write>(records: &[SessionRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, &r.to_raw())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
