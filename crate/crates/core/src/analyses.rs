//! Usage and latency, writing progress against a session-resampling
//! baseline, and suggestion influence against a random-suggestion baseline.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::oplog::{EventKind, EventLog, OplogError, Replayer, TaskType};
use crate::provider::ProviderError;
use crate::sessionizer::WorkingSession;
use crate::stats::{quantiles, SeededRng};
use crate::textmetrics::{
    max_pairwise_influence, split_sentences, word_count, Providers, Sentence, SimilarityMetricId,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("window must be positive")]
    InvalidWindow,
    #[error("n_runs must be at least 1")]
    InvalidRuns,
    #[error("number of phases must be at least 1")]
    InvalidPhases,
    #[error("no working session with positive duration")]
    NoSessions,
    #[error("log has no delivered suggestions")]
    NoSuggestions,
    #[error("session refers to unknown document {0}")]
    UnknownDocument(String),
    #[error(transparent)]
    Log(#[from] OplogError),
    #[error("provider failure after {} completed samples: {source}", partial.len())]
    ProviderFailure {
        #[source]
        source: ProviderError,
        partial: Partial,
    },
}

/// Results gathered before a provider failure.
#[derive(Debug, Clone, PartialEq)]
pub enum Partial {
    Treatment(InfluenceReport),
    Baseline(BaselineInfluence),
}

impl Partial {
    pub fn len(&self) -> usize {
        match self {
            Partial::Treatment(r) => r.samples.len(),
            Partial::Baseline(b) => b.scores.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadEventRecord {
    pub suggestion_id: String,
    pub task_id: String,
    pub task_type: TaskType,
    pub doc_id: String,
    pub read_ts_ms: u64,
    pub delivered_ts_ms: u64,
    pub created_ts_ms: u64,
    pub suggestion_text: String,
}

struct TaskInfo {
    task_type: TaskType,
    created_ts_ms: u64,
}

struct DeliveryInfo {
    task_id: String,
    doc_id: String,
    delivered_ts_ms: u64,
    text: String,
}

/// Tasks, deliveries and first reads of a log.
struct Lifecycle {
    tasks: BTreeMap<String, TaskInfo>,
    task_order: Vec<String>,
    deliveries: HashMap<String, DeliveryInfo>,
    delivery_order: Vec<String>,
    first_reads: HashMap<String, u64>,
}

fn lifecycle(log: &EventLog) -> Lifecycle {
    let mut lc = Lifecycle {
        tasks: BTreeMap::new(),
        task_order: Vec::new(),
        deliveries: HashMap::new(),
        delivery_order: Vec::new(),
        first_reads: HashMap::new(),
    };
    for ev in log.events() {
        match &ev.kind {
            EventKind::TaskCreated(t) => {
                lc.task_order.push(t.task_id.clone());
                lc.tasks.insert(
                    t.task_id.clone(),
                    TaskInfo {
                        task_type: t.task_type,
                        created_ts_ms: ev.ts_ms,
                    },
                );
            }
            EventKind::SuggestionDelivered(d) => {
                lc.delivery_order.push(d.suggestion_id.clone());
                lc.deliveries.insert(
                    d.suggestion_id.clone(),
                    DeliveryInfo {
                        task_id: d.task_id.clone(),
                        doc_id: ev.doc_id.clone(),
                        delivered_ts_ms: ev.ts_ms,
                        text: d.text.clone(),
                    },
                );
            }
            EventKind::SuggestionRead(r) => {
                let delivered = lc.deliveries.get(&r.suggestion_id).map(|d| d.delivered_ts_ms);
                if delivered.is_some_and(|d| ev.ts_ms >= d) {
                    lc.first_reads.entry(r.suggestion_id.clone()).or_insert(ev.ts_ms);
                }
            }
            EventKind::TextChange(_) => {}
        }
    }
    lc
}

/// One record per suggestion that was read, at its first read, ordered by
/// read time.
pub fn extract_read_events(log: &EventLog) -> Vec<ReadEventRecord> {
    let lc = lifecycle(log);
    let mut out: Vec<ReadEventRecord> = lc
        .delivery_order
        .iter()
        .filter_map(|sid| {
            let read_ts_ms = *lc.first_reads.get(sid)?;
            let d = &lc.deliveries[sid];
            let task = lc.tasks.get(&d.task_id)?;
            Some(ReadEventRecord {
                suggestion_id: sid.clone(),
                task_id: d.task_id.clone(),
                task_type: task.task_type,
                doc_id: d.doc_id.clone(),
                read_ts_ms,
                delivered_ts_ms: d.delivered_ts_ms,
                created_ts_ms: task.created_ts_ms,
                suggestion_text: d.text.clone(),
            })
        })
        .collect();
    out.sort_by(|a, b| (a.read_ts_ms, &a.suggestion_id).cmp(&(b.read_ts_ms, &b.suggestion_id)));
    out
}

/// Latency figures for one task type. Samples are per task: system latency
/// runs from creation to the first delivery, reading latency from the first
/// delivery to the first read of any of the task's suggestions, and a task
/// counts as unread when none of its suggestions was opened.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeLatency {
    pub task_type: TaskType,
    pub system_s: Vec<f64>,
    pub reading_s: Vec<f64>,
    /// 25th, 50th and 75th percentiles.
    pub system_quartiles: Option<[f64; 3]>,
    pub reading_quartiles: Option<[f64; 3]>,
    pub delivered_tasks: usize,
    pub unread_tasks: usize,
    pub delivered_suggestions: usize,
    pub unread_suggestions: usize,
}

impl TypeLatency {
    pub fn not_read_rate(&self) -> Option<f64> {
        (self.delivered_tasks > 0).then(|| self.unread_tasks as f64 / self.delivered_tasks as f64)
    }

    pub fn suggestion_not_read_rate(&self) -> Option<f64> {
        (self.delivered_suggestions > 0).then(|| self.unread_suggestions as f64 / self.delivered_suggestions as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    /// One entry per task type, in [`TaskType::ALL`] order.
    pub per_type: Vec<TypeLatency>,
}

impl LatencyReport {
    pub fn get(&self, task_type: TaskType) -> &TypeLatency {
        self.per_type
            .iter()
            .find(|t| t.task_type == task_type)
            .expect("every task type is reported")
    }
}

fn quartiles(samples: &[f64]) -> Option<[f64; 3]> {
    quantiles(samples, &[0.25, 0.5, 0.75]).ok().map(|q| [q[0], q[1], q[2]])
}

pub fn latency_report(log: &EventLog) -> LatencyReport {
    let lc = lifecycle(log);
    // task id -> (first delivery, first read)
    let mut per_task: HashMap<&str, (u64, Option<u64>)> = HashMap::new();
    let mut suggestion_counts: HashMap<TaskType, (usize, usize)> = HashMap::new();
    for sid in &lc.delivery_order {
        let d = &lc.deliveries[sid];
        let read = lc.first_reads.get(sid).copied();
        let entry = per_task.entry(d.task_id.as_str()).or_insert((d.delivered_ts_ms, None));
        entry.0 = entry.0.min(d.delivered_ts_ms);
        entry.1 = match (entry.1, read) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if let Some(task) = lc.tasks.get(&d.task_id) {
            let c = suggestion_counts.entry(task.task_type).or_default();
            c.0 += 1;
            c.1 += usize::from(read.is_none());
        }
    }
    let per_type = TaskType::ALL
        .iter()
        .map(|&task_type| {
            let mut system_s = Vec::new();
            let mut reading_s = Vec::new();
            let mut unread_tasks = 0;
            for tid in &lc.task_order {
                let task = &lc.tasks[tid];
                if task.task_type != task_type {
                    continue;
                }
                let Some(&(first_delivery, first_read)) = per_task.get(tid.as_str()) else {
                    continue;
                };
                system_s.push(first_delivery.saturating_sub(task.created_ts_ms) as f64 / 1000.0);
                match first_read {
                    Some(r) => reading_s.push(r.saturating_sub(first_delivery) as f64 / 1000.0),
                    None => unread_tasks += 1,
                }
            }
            let (delivered_suggestions, unread_suggestions) =
                suggestion_counts.get(&task_type).copied().unwrap_or_default();
            TypeLatency {
                task_type,
                system_quartiles: quartiles(&system_s),
                reading_quartiles: quartiles(&reading_s),
                delivered_tasks: system_s.len(),
                unread_tasks,
                delivered_suggestions,
                unread_suggestions,
                system_s,
                reading_s,
            }
        })
        .collect();
    LatencyReport { per_type }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Phase {
    pub counts: BTreeMap<TaskType, usize>,
}

impl Phase {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Share of each type present in the phase; empty for an empty phase.
    pub fn proportions(&self) -> BTreeMap<TaskType, f64> {
        let total = self.total();
        self.counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&t, &c)| (t, c as f64 / total as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageTrend {
    pub k: usize,
    pub phases: Vec<Phase>,
}

impl UsageTrend {
    pub fn totals(&self) -> BTreeMap<TaskType, usize> {
        let mut out = BTreeMap::new();
        for phase in &self.phases {
            for (&t, &c) in &phase.counts {
                *out.entry(t).or_default() += c;
            }
        }
        out
    }
}

/// Splits an ordered request sequence into `k` contiguous phases whose sizes
/// differ by at most one, larger phases first.
pub fn phase_split(requests: &[TaskType], k: usize) -> Result<UsageTrend, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::InvalidPhases);
    }
    let base = requests.len() / k;
    let extra = requests.len() % k;
    let mut phases = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let mut phase = Phase::default();
        for &t in &requests[start..start + size] {
            *phase.counts.entry(t).or_default() += 1;
        }
        phases.push(phase);
        start += size;
    }
    Ok(UsageTrend { k, phases })
}

/// Requests per document in creation order.
pub fn requests_by_document(log: &EventLog) -> BTreeMap<String, Vec<TaskType>> {
    let mut out: BTreeMap<String, Vec<TaskType>> = BTreeMap::new();
    for ev in log.events() {
        if let EventKind::TaskCreated(t) = &ev.kind {
            out.entry(ev.doc_id.clone()).or_default().push(t.task_type);
        }
    }
    out
}

/// Per-document phase tables.
pub fn usage_trend_per_document(log: &EventLog, k: usize) -> Result<BTreeMap<String, UsageTrend>, AnalysisError> {
    requests_by_document(log)
        .into_iter()
        .map(|(doc, reqs)| phase_split(&reqs, k).map(|t| (doc, t)))
        .collect()
}

/// Phases are taken per document and then summed phase by phase, so each
/// participant's early requests land in the early phases.
pub fn usage_trend(log: &EventLog, k: usize) -> Result<UsageTrend, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::InvalidPhases);
    }
    let mut pooled = UsageTrend {
        k,
        phases: vec![Phase::default(); k],
    };
    for trend in usage_trend_per_document(log, k)?.values() {
        for (acc, phase) in pooled.phases.iter_mut().zip(&trend.phases) {
            for (&t, &c) in &phase.counts {
                *acc.counts.entry(t).or_default() += c;
            }
        }
    }
    Ok(pooled)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgressSample {
    pub record: ReadEventRecord,
    pub window_s: u64,
    pub word_delta: i64,
}

fn doc_replayers<'a, 'd>(
    log: &'a EventLog,
    docs: impl IntoIterator<Item = &'d str>,
) -> Result<HashMap<String, Replayer<'a>>, AnalysisError> {
    let mut out = HashMap::new();
    for doc in docs {
        if !out.contains_key(doc) {
            if !log.has_document(doc) {
                return Err(AnalysisError::UnknownDocument(doc.to_string()));
            }
            out.insert(doc.to_string(), Replayer::new(log, doc)?);
        }
    }
    Ok(out)
}

fn word_delta(replay: &Replayer<'_>, t_ms: u64, window_s: u64) -> i64 {
    let before = word_count(&replay.text_at(t_ms)) as i64;
    let after = word_count(&replay.text_at(t_ms + window_s * 1000)) as i64;
    after - before
}

pub fn progress_samples(log: &EventLog, window_s: u64) -> Result<Vec<ProgressSample>, AnalysisError> {
    if window_s == 0 {
        return Err(AnalysisError::InvalidWindow);
    }
    let reads = extract_read_events(log);
    let replay = doc_replayers(log, reads.iter().map(|r| r.doc_id.as_str()))?;
    Ok(reads
        .into_iter()
        .map(|record| {
            let word_delta = word_delta(&replay[&record.doc_id], record.read_ts_ms, window_s);
            ProgressSample {
                record,
                window_s,
                word_delta,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineConfig {
    pub n_runs: usize,
    pub window_s: u64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            n_runs: 1000,
            window_s: 300,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    fn check(&self) -> Result<(), AnalysisError> {
        if self.n_runs == 0 {
            return Err(AnalysisError::InvalidRuns);
        }
        if self.window_s == 0 {
            return Err(AnalysisError::InvalidWindow);
        }
        Ok(())
    }
}

/// Picks a session with probability proportional to its duration and a
/// uniform millisecond inside it. Returns the session index and the time.
pub fn draw_session_time(rng: &mut SeededRng, sessions: &[WorkingSession]) -> Option<(usize, u64)> {
    let weights: Vec<f64> = sessions.iter().map(|s| s.duration_ms() as f64).collect();
    let i = rng.choose_weighted(&weights)?;
    let s = &sessions[i];
    Some((i, s.start_ms + rng.below(s.duration_ms())))
}

fn has_positive_session(sessions: &[WorkingSession]) -> bool {
    sessions.iter().any(|s| s.duration_ms() > 0)
}

/// Word deltas over `window_s` from random session times, one per run.
pub fn baseline_progress(
    log: &EventLog,
    config: &BaselineConfig,
    sessions: &[WorkingSession],
) -> Result<Vec<i64>, AnalysisError> {
    config.check()?;
    if !has_positive_session(sessions) {
        return Err(AnalysisError::NoSessions);
    }
    let replay = doc_replayers(log, sessions.iter().map(|s| s.doc_id.as_str()))?;
    let root = SeededRng::new(config.seed);
    Ok((0..config.n_runs)
        .map(|run| {
            let mut rng = root.split(run as u64);
            let (i, t) = draw_session_time(&mut rng, sessions).expect("positive total duration");
            word_delta(&replay[&sessions[i].doc_id], t, config.window_s)
        })
        .collect())
}

/// Sentences of `after` whose trimmed text has no exact match in `before`.
pub fn newly_edited(text_before: &str, text_after: &str) -> Vec<Sentence> {
    let before: HashSet<String> = split_sentences(text_before)
        .into_iter()
        .map(|s| s.text.trim().to_string())
        .collect();
    split_sentences(text_after)
        .into_iter()
        .filter(|s| !before.contains(s.text.trim()))
        .collect()
}

fn sentence_texts(sentences: &[Sentence]) -> Vec<&str> {
    sentences
        .iter()
        .map(|s| s.text.trim())
        .filter(|s| !s.is_empty())
        .collect()
}

fn window_influence(
    replay: &Replayer<'_>,
    t_ms: u64,
    window_s: u64,
    suggestion_text: &str,
    metric: SimilarityMetricId,
    providers: &Providers,
) -> Result<Option<f64>, ProviderError> {
    let fresh = newly_edited(&replay.text_at(t_ms), &replay.text_at(t_ms + window_s * 1000));
    let suggestion = split_sentences(suggestion_text);
    max_pairwise_influence(metric, &sentence_texts(&suggestion), &sentence_texts(&fresh), providers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceSample {
    pub record: ReadEventRecord,
    pub metric: SimilarityMetricId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceReport {
    pub metric: SimilarityMetricId,
    pub window_s: u64,
    pub samples: Vec<InfluenceSample>,
    /// Read events with no new sentence in the window (or an empty suggestion).
    pub excluded: usize,
}

pub fn influence_samples(
    log: &EventLog,
    window_s: u64,
    metric: SimilarityMetricId,
    providers: &Providers,
) -> Result<InfluenceReport, AnalysisError> {
    if window_s == 0 {
        return Err(AnalysisError::InvalidWindow);
    }
    let reads = extract_read_events(log);
    let replay = doc_replayers(log, reads.iter().map(|r| r.doc_id.as_str()))?;
    let mut report = InfluenceReport {
        metric,
        window_s,
        samples: Vec::new(),
        excluded: 0,
    };
    for record in reads {
        let scored = window_influence(
            &replay[&record.doc_id],
            record.read_ts_ms,
            window_s,
            &record.suggestion_text,
            metric,
            providers,
        );
        match scored {
            Ok(Some(score)) => report.samples.push(InfluenceSample { record, metric, score }),
            Ok(None) => report.excluded += 1,
            Err(source) => {
                return Err(AnalysisError::ProviderFailure {
                    source,
                    partial: Partial::Treatment(report),
                })
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineInfluence {
    pub scores: Vec<f64>,
    /// Runs whose window held no new sentence.
    pub excluded: usize,
}

/// Influence of a uniformly drawn suggestion of the same document on the
/// sentences written after a random session time.
pub fn baseline_influence(
    log: &EventLog,
    config: &BaselineConfig,
    sessions: &[WorkingSession],
    metric: SimilarityMetricId,
    providers: &Providers,
) -> Result<BaselineInfluence, AnalysisError> {
    config.check()?;
    let lc = lifecycle(log);
    let mut by_doc: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for sid in &lc.delivery_order {
        let d = &lc.deliveries[sid];
        by_doc.entry(d.doc_id.as_str()).or_default().push(d.text.as_str());
    }
    if by_doc.is_empty() {
        return Err(AnalysisError::NoSuggestions);
    }
    let eligible: Vec<WorkingSession> = sessions
        .iter()
        .filter(|s| by_doc.contains_key(s.doc_id.as_str()))
        .cloned()
        .collect();
    if !has_positive_session(&eligible) {
        return Err(AnalysisError::NoSessions);
    }
    let replay = doc_replayers(log, eligible.iter().map(|s| s.doc_id.as_str()))?;
    let root = SeededRng::new(config.seed);
    let mut out = BaselineInfluence::default();
    for run in 0..config.n_runs {
        let mut rng = root.split(run as u64);
        let (i, t) = draw_session_time(&mut rng, &eligible).expect("positive total duration");
        let doc = eligible[i].doc_id.as_str();
        let pool = &by_doc[doc];
        let suggestion = pool[rng.below(pool.len() as u64) as usize];
        match window_influence(&replay[doc], t, config.window_s, suggestion, metric, providers) {
            Ok(Some(score)) => out.scores.push(score),
            Ok(None) => out.excluded += 1,
            Err(source) => {
                return Err(AnalysisError::ProviderFailure {
                    source,
                    partial: Partial::Baseline(out),
                })
            }
        }
    }
    Ok(out)
}
