//! Command-line front end. Every subcommand maps onto one library operation;
//! data goes to stdout (or `--out`), diagnostics to stderr.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 internal error.

pub mod serve;

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use wlan_core::ingest::{
    ingest_files, write_jsonl, IngestError, IngestOptions, IngestStats, Salt, Strictness, SALT_ENV,
};
use wlan_core::pipeline::{
    describe, detect, evaluate, prescribe, read_json, run_pipeline, select_days, AnalysisRun,
    PipelineConfig, PipelineError,
};
use wlan_core::prescriptive::FlagRule;
use wlan_core::report::{evaluation_table, recommendations_text, render_report};
use wlan_core::simulator::{
    describe as describe_month, generate_month, DeviceOutput, GroundTruth, SimConfig,
};
use wlan_core::{ObservationWindow, SessionRecord};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or unusable input data.
    #[error("{0}")]
    Input(String),
    /// Anything else: output failures, bind failures, bugs.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Input(format!("ingest: {e}"))
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io { .. } => CliError::Internal(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn write_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("writing {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "wlan-analytics",
    version,
    about = "Campus WLAN telemetry analytics"
)]
pub struct Cli {
    /// Suppress diagnostics; stdout carries only the requested artifact.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic month of controller logs with injected anomalies.
    Simulate(SimulateArgs),
    /// Parse, anonymize and validate logs into canonical JSONL.
    Ingest(IngestArgs),
    /// Daily aggregates, weekday baseline, hourly profile and AP statistics.
    Analyze(AnalysisArgs),
    /// Run the detectors and print classified anomalies.
    Detect(AnalysisArgs),
    /// Print recommendations, from logs or from a stored run.
    Recommend(RecommendArgs),
    /// Full pipeline; writes a run directory with a manifest.
    Run(RunArgs),
    /// Precision and recall of a stored run against simulator labels.
    Evaluate(EvaluateArgs),
    /// Render JSON, CSV, HTML and text reports from a stored run.
    Report(ReportArgs),
    /// Serve /metrics, /alerts and /healthz for a run directory.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output JSONL file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the injected ground truth (JSON).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// File of `key=value` simulator overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the number of simulated days.
    #[arg(long)]
    pub days: Option<usize>,
    /// Write anonymized device ids instead of MAC addresses.
    #[arg(long)]
    pub anonymized: bool,
    /// Salt file (32 hex chars or 16 raw bytes); otherwise WLC_SALT_HEX.
    #[arg(long)]
    pub salt_file: Option<PathBuf>,
}

/// Where records come from and how they are read.
#[derive(Debug, Args, Clone)]
pub struct InputArgs {
    /// Input logs (.jsonl or .csv); repeat or comma-separate for several.
    #[arg(long = "in", required = true, value_delimiter = ',')]
    pub inputs: Vec<PathBuf>,
    /// Salt file (32 hex chars or 16 raw bytes); otherwise WLC_SALT_HEX.
    #[arg(long)]
    pub salt_file: Option<PathBuf>,
    /// Devices are already anonymized 32-hex ids; no salt needed.
    #[arg(long)]
    pub pre_anonymized: bool,
    /// Fail on the first bad line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output JSONL file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep only records inside these local days (FIRST..LAST).
    #[arg(long, value_parser = parse_days)]
    pub days: Option<(NaiveDate, NaiveDate)>,
}

/// Pipeline tuning shared by the analysis subcommands.
#[derive(Debug, Args, Clone, Default)]
pub struct TuningArgs {
    /// File of `key=value` pipeline overrides (e.g. `detection.k=2.5`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Peak concurrent clients above which an AP is overloaded.
    #[arg(long)]
    pub overload_threshold: Option<u32>,
    /// Rolling window, in days, of the dynamic thresholds (at least 5).
    #[arg(long)]
    pub window: Option<usize>,
    /// Alert band half-width in standard deviations.
    #[arg(long)]
    pub k: Option<f64>,
    /// Combine the latency and loss bounds with `all` or `any`.
    #[arg(long)]
    pub flag_rule: Option<FlagRule>,
    /// Analyzed local days, FIRST..LAST (inclusive).
    #[arg(long, value_parser = parse_days)]
    pub days: Option<(NaiveDate, NaiveDate)>,
    /// Isolation-forest seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Stored run directory to read anomalies and AP statistics from.
    #[arg(long, conflicts_with = "inputs")]
    pub run: Option<PathBuf>,
    /// Input logs when no run directory is given.
    #[arg(long = "in", value_delimiter = ',')]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub salt_file: Option<PathBuf>,
    #[arg(long)]
    pub pre_anonymized: bool,
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Plain text instead of JSON.
    #[arg(long)]
    pub text: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Run directory to create or overwrite.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Ground truth written by `simulate --labels`.
    #[arg(long)]
    pub labels: PathBuf,
    /// JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Output directory; `<run>/report` when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, default_value = "127.0.0.1:9108")]
    pub addr: SocketAddr,
    /// How often to check the run manifest for a newer run, in milliseconds.
    #[arg(long, default_value_t = 2000)]
    pub poll_ms: u64,
}

/// `FIRST..LAST` or `FIRST,LAST`, ISO dates.
pub fn parse_days(s: &str) -> Result<(NaiveDate, NaiveDate), String> {
    let (a, b) = s
        .split_once("..")
        .or_else(|| s.split_once(','))
        .ok_or_else(|| format!("expected FIRST..LAST, got '{s}'"))?;
    let day = |t: &str| {
        NaiveDate::parse_from_str(t.trim(), "%Y-%m-%d").map_err(|e| format!("'{t}': {e}"))
    };
    let (a, b) = (day(a)?, day(b)?);
    if a > b {
        return Err(format!("{a} is after {b}"));
    }
    Ok((a, b))
}

struct Diag {
    quiet: bool,
}

impl Diag {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn load_salt(file: Option<&Path>) -> Result<Option<Salt>, CliError> {
    match file {
        Some(p) => Ok(Some(Salt::from_file(p)?)),
        None => Ok(Salt::from_env()?),
    }
}

fn require_salt(file: Option<&Path>) -> Result<Salt, CliError> {
    load_salt(file)?.ok_or_else(|| {
        CliError::Input(format!(
            "a salt is required: pass --salt-file or set {SALT_ENV}"
        ))
    })
}

fn read_input(
    input: &InputArgs,
    window: Option<ObservationWindow>,
) -> Result<(Vec<SessionRecord>, IngestStats), CliError> {
    let salt = if input.pre_anonymized {
        None
    } else {
        Some(require_salt(input.salt_file.as_deref())?)
    };
    for p in &input.inputs {
        if !p.is_file() {
            return Err(CliError::Input(format!(
                "input {} does not exist",
                p.display()
            )));
        }
    }
    let opts = IngestOptions {
        format: None,
        strictness: if input.strict {
            Strictness::Strict
        } else {
            Strictness::Lenient
        },
        pre_anonymized: input.pre_anonymized,
        window,
    };
    let paths: Vec<&Path> = input.inputs.iter().map(PathBuf::as_path).collect();
    Ok(ingest_files(&paths, salt.as_ref(), &opts)?)
}

fn report_stats(diag: &Diag, stats: &IngestStats) {
    let mut line = format!(
        "read {} lines: {} accepted, {} skipped",
        stats.lines_read, stats.accepted, stats.skipped
    );
    for (label, n) in &stats.errors {
        line.push_str(&format!("; {label}: {n}"));
    }
    diag.say(line);
}

fn pipeline_config(t: &TuningArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &t.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        cfg.apply_overrides(&text)?;
    }
    if let Some(v) = t.overload_threshold {
        cfg.aggregate.overload_threshold = v;
    }
    if let Some(v) = t.window {
        cfg.detection.window = v;
    }
    if let Some(v) = t.k {
        cfg.detection.k = v;
        cfg.prescriptive.k = v;
    }
    if let Some(v) = t.flag_rule {
        cfg.prescriptive.flag_rule = v;
    }
    if let Some(v) = t.days {
        cfg.days = Some(v);
    }
    if let Some(v) = t.seed {
        cfg.detection.forest.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `bytes` to `out`, or to stdout when `out` is `None`.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(write_err(dir))?;
            }
            fs::write(path, bytes).map_err(write_err(path))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Internal(format!("writing stdout: {e}")))
        }
    }
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("output serializes");
    v.push(b'\n');
    v
}

fn cmd_simulate(a: &SimulateArgs, diag: &Diag) -> Result<(), CliError> {
    let mut cfg = SimConfig::default();
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        cfg.apply_overrides(&text)
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    if let Some(days) = a.days {
        cfg.days = days;
        cfg.validate().map_err(|e| CliError::Input(e.to_string()))?;
    }
    let salt = require_salt(a.salt_file.as_deref())?;
    let month = generate_month(&cfg, a.seed, &salt).map_err(|e| CliError::Input(e.to_string()))?;
    let devices = if a.anonymized {
        DeviceOutput::Anonymized(&salt)
    } else {
        DeviceOutput::Mac
    };
    match &a.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(write_err(path))?;
            let mut w = BufWriter::new(file);
            month
                .write_jsonl(&mut w, devices)
                .and_then(|_| w.flush())
                .map_err(write_err(path))?;
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            month
                .write_jsonl(&mut w, devices)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::Internal(format!("writing stdout: {e}")))?;
        }
    }
    if let Some(path) = &a.labels {
        emit(Some(path), &json_bytes(&month.truth))?;
    }
    diag.say(describe_month(&month));
    Ok(())
}

fn cmd_ingest(a: &IngestArgs, diag: &Diag) -> Result<(), CliError> {
    let window = a.days.map(|(f, l)| ObservationWindow::local_days(f, l));
    let (records, stats) = read_input(&a.input, window)?;
    report_stats(diag, &stats);
    let mut buf = Vec::new();
    write_jsonl(&records, &mut buf).map_err(|e| CliError::Internal(e.to_string()))?;
    emit(a.out.as_deref(), &buf)
}

fn cmd_analyze(a: &AnalysisArgs, diag: &Diag) -> Result<(), CliError> {
    let cfg = pipeline_config(&a.tuning)?;
    let (records, stats) = read_input(&a.input, None)?;
    report_stats(diag, &stats);
    let (first, last, selected) = select_days(&records, &cfg)?;
    let desc = describe(&selected, first, last, &cfg)?;
    emit(a.out.as_deref(), &json_bytes(&desc))
}

fn cmd_detect(a: &AnalysisArgs, diag: &Diag) -> Result<(), CliError> {
    let cfg = pipeline_config(&a.tuning)?;
    let (records, stats) = read_input(&a.input, None)?;
    report_stats(diag, &stats);
    let (first, last, selected) = select_days(&records, &cfg)?;
    let desc = describe(&selected, first, last, &cfg)?;
    let (_, anomalies) = detect(&selected, &desc, &cfg)?;
    diag.say(format!(
        "{} anomalies over {} days",
        anomalies.len(),
        desc.aggregates.len()
    ));
    emit(a.out.as_deref(), &json_bytes(&anomalies))
}

fn cmd_recommend(a: &RecommendArgs, diag: &Diag) -> Result<(), CliError> {
    let recs = match &a.run {
        Some(dir) => {
            let mut run = AnalysisRun::read_dir(dir)?;
            if let Some(rule) = a.tuning.flag_rule {
                run.config.prescriptive.flag_rule = rule;
            }
            prescribe(&run.descriptive, &run.anomalies, &run.config)
        }
        None => {
            if a.inputs.is_empty() {
                return Err(CliError::Input("recommend needs --run or --in".into()));
            }
            let input = InputArgs {
                inputs: a.inputs.clone(),
                salt_file: a.salt_file.clone(),
                pre_anonymized: a.pre_anonymized,
                strict: a.strict,
            };
            let cfg = pipeline_config(&a.tuning)?;
            let (records, stats) = read_input(&input, None)?;
            report_stats(diag, &stats);
            let (first, last, selected) = select_days(&records, &cfg)?;
            let desc = describe(&selected, first, last, &cfg)?;
            let (_, anomalies) = detect(&selected, &desc, &cfg)?;
            prescribe(&desc, &anomalies, &cfg)
        }
    };
    if a.text {
        emit(a.out.as_deref(), recommendations_text(&recs).as_bytes())
    } else {
        emit(a.out.as_deref(), &json_bytes(&recs))
    }
}

fn cmd_run(a: &RunArgs, diag: &Diag) -> Result<(), CliError> {
    let cfg = pipeline_config(&a.tuning)?;
    let (records, stats) = read_input(&a.input, None)?;
    report_stats(diag, &stats);
    let run = run_pipeline(&records, &cfg)?;
    let manifest = run.write_dir(&a.out)?;
    for t in &run.timings {
        diag.say(format!("  {:<13} {:>9.1} ms", t.stage, t.millis));
    }
    diag.say(format!(
        "run {}: {} days, {} anomalies, {} recommendations, {} artifacts in {}",
        manifest.run_id,
        run.descriptive.aggregates.len(),
        run.anomalies.len(),
        run.recommendations.len(),
        manifest.artifacts.len(),
        a.out.display()
    ));
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let anomalies: Vec<wlan_core::AnomalyEvent> = read_json(&a.run.join("anomalies.json"))?;
    let truth: GroundTruth = read_json(&a.labels)?;
    let eval = evaluate(&anomalies, &truth);
    if a.json {
        emit(None, &json_bytes(&eval))
    } else {
        emit(None, evaluation_table(&eval).as_bytes())
    }
}

fn cmd_report(a: &ReportArgs, diag: &Diag) -> Result<(), CliError> {
    let run = AnalysisRun::read_dir(&a.run)?;
    let out = a.out.clone().unwrap_or_else(|| a.run.join("report"));
    let paths = render_report(&run)
        .write_to(&out)
        .map_err(write_err(&out))?;
    for p in paths {
        diag.say(format!("wrote {}", p.display()));
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let diag = Diag { quiet: cli.quiet };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &diag),
        Command::Ingest(a) => cmd_ingest(a, &diag),
        Command::Analyze(a) => cmd_analyze(a, &diag),
        Command::Detect(a) => cmd_detect(a, &diag),
        Command::Recommend(a) => cmd_recommend(a, &diag),
        Command::Run(a) => cmd_run(a, &diag),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a, &diag),
        Command::Serve(a) => {
            serve::serve_blocking(&a.run, a.addr, Duration::from_millis(a.poll_ms), cli.quiet)
        }
    }
}

/// Parses `args` and runs; usage errors go to stderr with exit code 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let _ = e.print();
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
