//! `inkflux` command line: log validation and replay, session segmentation,
//! the three analyses with CSV/SVG reports, and synthetic or simulated log
//! generation.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use inkflux_core::analyses::{
    baseline_influence, baseline_progress, influence_samples, latency_report, progress_samples, usage_trend,
    usage_trend_per_document, AnalysisError, BaselineConfig,
};
use inkflux_core::oplog::{parse_event_log, reconstruct_at, EventKind, EventLog, TaskType};
use inkflux_core::orchestrator::OrchestratorError;
use inkflux_core::remote::{
    HttpSettings, RemoteEmbedder, RemoteParaphraser, EMBED_ENDPOINT_ENV, PARAPHRASE_ENDPOINT_ENV,
};
use inkflux_core::report::{
    emit_kde_svg, influence_csv, kde_csv, latency_csv, progress_csv, usage_by_doc_csv, usage_csv, InfluenceRow,
    ProgressRow, SvgStyle, BASELINE_LABEL,
};
use inkflux_core::sessionizer::{knee_threshold, log_sessions, log_sweep, SessionMode, WorkingSession};
use inkflux_core::stats::{gaussian_kde, KdeCurve};
use inkflux_core::synthgen::{generate_log, simulate, truth_path, SimulationConfig, SynthConfig, SynthError};
use inkflux_core::textmetrics::{Providers, SemanticBackend, SimilarityMetricId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;

pub const KDE_GRID_POINTS: usize = 512;
pub const PROGRESS_CLIP: (f64, f64) = (0.0, 200.0);
pub const INFLUENCE_CLIP: (f64, f64) = (0.0, 1.0);

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Provider(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Provider(_) => EXIT_PROVIDER,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Provider(m) => write!(f, "provider error: {m}"),
        }
    }
}

fn data(e: impl fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::ProviderFailure { .. } => CliError::Provider(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Orchestrator(OrchestratorError::ProviderFailure { .. }) => CliError::Provider(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "inkflux",
    version,
    about = "Writing-session log analytics and suggestion simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a log and report its size.
    Validate { log: PathBuf },
    /// Print a document's text at a timestamp (milliseconds, inclusive).
    Reconstruct {
        log: PathBuf,
        #[arg(long)]
        doc: String,
        #[arg(long)]
        at: u64,
    },
    /// Threshold sweep, knee and session count.
    Sessions {
        log: PathBuf,
        /// Thresholds in seconds as lo:hi:step.
        #[arg(long, default_value = "60:1200:60")]
        sweep: String,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Usage and latency tables.
    Rq1 {
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        phases: usize,
    },
    /// Writing progress after reads against a session-resampling baseline.
    Rq2 {
        log: PathBuf,
        /// Window in seconds; repeat for several windows.
        #[arg(long = "window", default_values_t = [300u64, 180])]
        windows: Vec<u64>,
        #[command(flatten)]
        baseline: BaselineArgs,
    },
    /// Suggestion influence against a random-suggestion baseline.
    Rq3 {
        log: PathBuf,
        /// edit, semantic or paraphrase; repeat for several metrics.
        #[arg(long = "metric", default_values_t = [SimilarityMetricId::Edit, SimilarityMetricId::Semantic, SimilarityMetricId::Paraphrase])]
        metrics: Vec<SimilarityMetricId>,
        #[arg(long, default_value_t = 300)]
        window: u64,
        /// Remote embedding service (overrides INKFLUX_EMBED_ENDPOINT).
        #[arg(long)]
        embed_endpoint: Option<String>,
        /// Remote paraphrase service (overrides INKFLUX_PARAPHRASE_ENDPOINT).
        #[arg(long)]
        paraphrase_endpoint: Option<String>,
        #[command(flatten)]
        baseline: BaselineArgs,
    },
    /// Generate a synthetic log and its ground-truth sidecar.
    Synth {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a world through the orchestrator's providers on a virtual clock.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct ModeArgs {
    /// Segment each document separately (default).
    #[arg(long, conflicts_with = "pooled")]
    per_doc: bool,
    /// Merge all documents into one activity stream.
    #[arg(long)]
    pooled: bool,
}

impl ModeArgs {
    fn mode(&self) -> SessionMode {
        if self.pooled {
            SessionMode::Pooled
        } else {
            SessionMode::PerDocument
        }
    }
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Session threshold in seconds; the sweep's knee when absent.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Runs the command line and returns the process exit code. Output goes to
/// `out`, the single diagnostic line of a failure to `err`.
pub fn run_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let msg = e.to_string();
                    let first = msg
                        .lines()
                        .find(|l| !l.trim().is_empty())
                        .unwrap_or("invalid arguments");
                    let _ = writeln!(err, "{}", first.trim());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

pub fn run_command(argv: &[String]) -> i32 {
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Validate { log } => {
            let log = load_log(&log)?;
            let tasks = log
                .events()
                .iter()
                .filter(|e| matches!(e.kind, EventKind::TaskCreated(_)))
                .count();
            say(
                out,
                format!(
                    "ok: {} events, {} documents, {} tasks",
                    log.len(),
                    log.documents().count(),
                    tasks
                ),
            )
        }
        Command::Reconstruct { log, doc, at } => {
            let log = load_log(&log)?;
            let state = reconstruct_at(&log, &doc, at).map_err(data)?;
            say(out, state.text)
        }
        Command::Sessions { log, sweep, mode } => {
            let thresholds = parse_sweep(&sweep)?;
            let log = load_log(&log)?;
            sessions_command(&log, &thresholds, mode.mode(), out)
        }
        Command::Rq1 { log, out: dir, phases } => {
            let log = load_log(&log)?;
            let files = rq1(&log, phases, &dir)?;
            say(out, format!("wrote {}", files.join(", ")))
        }
        Command::Rq2 { log, windows, baseline } => {
            let log = load_log(&log)?;
            let sessions = sessions_for(&log, baseline.threshold)?;
            let files = rq2(&log, &windows, &sessions, baseline.runs, baseline.seed, &baseline.out)?;
            say(out, format!("wrote {}", files.join(", ")))
        }
        Command::Rq3 {
            log,
            metrics,
            window,
            embed_endpoint,
            paraphrase_endpoint,
            baseline,
        } => {
            let log = load_log(&log)?;
            let providers = providers(embed_endpoint, paraphrase_endpoint)?;
            let sessions = sessions_for(&log, baseline.threshold)?;
            let files = rq3(
                &log,
                &metrics,
                window,
                &sessions,
                baseline.runs,
                baseline.seed,
                &providers,
                &baseline.out,
            )?;
            say(out, format!("wrote {}", files.join(", ")))
        }
        Command::Synth {
            config,
            out: path,
            seed,
        } => {
            let mut cfg: SynthConfig = load_json(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (log, truth) = generate_log(&cfg)?;
            write_log(&path, &log, &truth.to_json())?;
            say(out, format!("wrote {} events to {}", log.len(), path.display()))
        }
        Command::Simulate {
            config,
            out: path,
            seed,
        } => {
            let mut cfg: SimulationConfig = load_json(&config)?;
            if let Some(s) = seed {
                cfg.world.seed = s;
            }
            let (log, truth) = simulate(&cfg)?;
            write_log(&path, &log, &truth.to_json())?;
            say(
                out,
                format!(
                    "wrote {} events to {} (estimated cost ${:.2})",
                    log.len(),
                    path.display(),
                    truth.estimated_cost
                ),
            )
        }
    }
}

fn say(out: &mut dyn Write, line: impl fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(data)
}

pub fn load_log(path: &Path) -> Result<EventLog, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_event_log(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_log(path: &Path, log: &EventLog, truth_json: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(data)?;
    }
    write_file(path, &log.to_jsonl())?;
    write_file(Path::new(&truth_path(&path.to_string_lossy())), truth_json)
}

/// `lo:hi:step` in seconds, both ends inclusive.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "--sweep expects lo:hi:step with 0 < lo <= hi and step > 0, got {spec:?}"
        ))
    };
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if !(lo > 0.0 && hi >= lo && step > 0.0 && hi.is_finite()) {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

fn sessions_command(
    log: &EventLog,
    thresholds: &[f64],
    mode: SessionMode,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let sweep = log_sweep(log, thresholds, mode).map_err(data)?;
    say(out, "threshold_s,session_count")?;
    for p in &sweep.points {
        say(out, format!("{},{}", p.threshold_s, p.session_count))?;
    }
    match knee_threshold(&sweep) {
        Ok(knee) => {
            let n = log_sessions(log, knee, mode).map_err(data)?.len();
            say(out, format!("knee_s={knee} sessions={n}"))
        }
        Err(e) => say(out, format!("knee_s= ({e})")),
    }
}

/// Per-document sessions at `threshold`, or at the knee of the default sweep.
pub fn sessions_for(log: &EventLog, threshold: Option<f64>) -> Result<Vec<WorkingSession>, CliError> {
    let theta = match threshold {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(CliError::Usage(format!("--threshold must be positive, got {t}"))),
        None => {
            let sweep = log_sweep(
                log,
                &inkflux_core::sessionizer::default_thresholds(),
                SessionMode::PerDocument,
            )
            .map_err(data)?;
            knee_threshold(&sweep).map_err(data)?
        }
    };
    log_sessions(log, theta, SessionMode::PerDocument).map_err(data)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

pub fn rq1(log: &EventLog, phases: usize, dir: &Path) -> Result<Vec<String>, CliError> {
    if phases == 0 {
        return Err(CliError::Usage("--phases must be at least 1".into()));
    }
    ensure_dir(dir)?;
    write_file(
        &dir.join("latency.csv"),
        &latency_csv(&latency_report(log)).map_err(data)?,
    )?;
    write_file(
        &dir.join("usage.csv"),
        &usage_csv(&usage_trend(log, phases)?).map_err(data)?,
    )?;
    let per_doc = usage_trend_per_document(log, phases)?;
    write_file(
        &dir.join("usage_by_doc.csv"),
        &usage_by_doc_csv(&per_doc).map_err(data)?,
    )?;
    Ok(vec![
        "latency.csv".into(),
        "usage.csv".into(),
        "usage_by_doc.csv".into(),
    ])
}

/// KDE per label with at least two samples; labels keep the given order.
fn curves(groups: &[(String, Vec<f64>)], clip: (f64, f64)) -> Vec<(String, KdeCurve)> {
    groups
        .iter()
        .filter_map(|(label, xs)| {
            gaussian_kde(xs, None, KDE_GRID_POINTS, Some(clip))
                .ok()
                .map(|c| (label.clone(), c))
        })
        .collect()
}

fn grouped<'a>(rows: impl Iterator<Item = (&'a str, f64)>) -> Vec<(String, Vec<f64>)> {
    let mut groups: Vec<(String, Vec<f64>)> = TaskType::ALL
        .iter()
        .map(|t| t.to_string())
        .chain([BASELINE_LABEL.to_string()])
        .map(|l| (l, Vec::new()))
        .collect();
    for (label, x) in rows {
        if let Some(g) = groups.iter_mut().find(|g| g.0 == label) {
            g.1.push(x);
        }
    }
    groups
}

fn write_figure(
    dir: &Path,
    stem: &str,
    groups: &[(String, Vec<f64>)],
    clip: (f64, f64),
    style: &SvgStyle,
    files: &mut Vec<String>,
) -> Result<(), CliError> {
    let curves = curves(groups, clip);
    if curves.is_empty() {
        return Ok(());
    }
    write_file(&dir.join(format!("kde_{stem}.csv")), &kde_csv(&curves).map_err(data)?)?;
    write_file(
        &dir.join(format!("{stem}.svg")),
        &emit_kde_svg(&curves, style).map_err(data)?,
    )?;
    files.push(format!("kde_{stem}.csv"));
    files.push(format!("{stem}.svg"));
    Ok(())
}

pub fn rq2(
    log: &EventLog,
    windows: &[u64],
    sessions: &[WorkingSession],
    runs: usize,
    seed: u64,
    dir: &Path,
) -> Result<Vec<String>, CliError> {
    ensure_dir(dir)?;
    let mut rows = Vec::new();
    let mut files = vec!["progress.csv".to_string()];
    let mut figures = Vec::new();
    for &window_s in windows {
        let treated: Vec<ProgressRow> = progress_samples(log, window_s)?
            .iter()
            .map(ProgressRow::from_sample)
            .collect();
        let config = BaselineConfig {
            n_runs: runs,
            window_s,
            seed,
        };
        let baseline: Vec<ProgressRow> = baseline_progress(log, &config, sessions)?
            .into_iter()
            .enumerate()
            .map(|(run, d)| ProgressRow::baseline(run, window_s, d))
            .collect();
        let groups = grouped(
            treated
                .iter()
                .chain(&baseline)
                .map(|r| (r.task_type.as_str(), r.word_delta as f64)),
        );
        figures.push((window_s, groups));
        rows.extend(treated);
        rows.extend(baseline);
    }
    write_file(&dir.join("progress.csv"), &progress_csv(&rows).map_err(data)?)?;
    for (window_s, groups) in figures {
        let style = SvgStyle {
            title: format!("Word-count progress within {window_s} s of a read"),
            x_label: "words added".into(),
            y_label: "density".into(),
        };
        write_figure(
            dir,
            &format!("progress_{window_s}s"),
            &groups,
            PROGRESS_CLIP,
            &style,
            &mut files,
        )?;
    }
    Ok(files)
}

#[allow(clippy::too_many_arguments)]
pub fn rq3(
    log: &EventLog,
    metrics: &[SimilarityMetricId],
    window_s: u64,
    sessions: &[WorkingSession],
    runs: usize,
    seed: u64,
    providers: &Providers,
    dir: &Path,
) -> Result<Vec<String>, CliError> {
    ensure_dir(dir)?;
    let mut rows = Vec::new();
    let mut files = vec!["influence.csv".to_string()];
    let mut figures = Vec::new();
    let config = BaselineConfig {
        n_runs: runs,
        window_s,
        seed,
    };
    for &metric in metrics {
        let treated = InfluenceRow::from_report(&influence_samples(log, window_s, metric, providers)?);
        let baseline: Vec<InfluenceRow> = baseline_influence(log, &config, sessions, metric, providers)?
            .scores
            .into_iter()
            .enumerate()
            .map(|(run, score)| InfluenceRow {
                read_event_id: inkflux_core::report::baseline_id(run),
                task_type: BASELINE_LABEL.into(),
                metric: metric.to_string(),
                score,
            })
            .collect();
        let groups = grouped(treated.iter().chain(&baseline).map(|r| (r.task_type.as_str(), r.score)));
        figures.push((metric, groups));
        rows.extend(treated);
        rows.extend(baseline);
    }
    write_file(&dir.join("influence.csv"), &influence_csv(&rows).map_err(data)?)?;
    for (metric, groups) in figures {
        let style = SvgStyle {
            title: format!("Influence of read suggestions ({metric})"),
            x_label: "max sentence similarity".into(),
            y_label: "density".into(),
        };
        write_figure(
            dir,
            &format!("influence_{metric}"),
            &groups,
            INFLUENCE_CLIP,
            &style,
            &mut files,
        )?;
    }
    Ok(files)
}

fn endpoint(flag: Option<String>, env: &str) -> Option<String> {
    flag.or_else(|| std::env::var(env).ok()).filter(|s| !s.is_empty())
}

fn providers(embed: Option<String>, paraphrase: Option<String>) -> Result<Providers, CliError> {
    let settings = HttpSettings::from_env();
    let mut p = Providers::default();
    if let Some(url) = endpoint(embed, EMBED_ENDPOINT_ENV) {
        let e = RemoteEmbedder::new(&url, None, &settings).map_err(|e| CliError::Provider(e.to_string()))?;
        p.semantic = SemanticBackend::Embedding(Box::new(e));
    }
    if let Some(url) = endpoint(paraphrase, PARAPHRASE_ENDPOINT_ENV) {
        let r = RemoteParaphraser::new(&url, &settings).map_err(|e| CliError::Provider(e.to_string()))?;
        p.paraphrase = Box::new(r);
    }
    Ok(p)
}
