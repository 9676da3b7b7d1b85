//! Headless suggestion-task engine: task creation with parameter defaults,
//! cost estimation, prompt rendering, provider dispatch and an ordered log
//! writer that turns scheduled lifecycle events into an [`EventLog`].

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oplog::{
    Delta, Event, EventKind, EventLog, Horizon, OplogError, SuggestionDelivered, SuggestionRead, TaskCreated, TaskType,
};
use crate::provider::ProviderError;
use crate::stats::SeededRng;
use crate::textmetrics::word_count;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrchestratorError {
    #[error("snippet is empty")]
    EmptySnippet,
    #[error("invalid parameters for {task_type} task: {reason}")]
    InvalidParams { task_type: TaskType, reason: String },
    #[error("no provider registered for {0} tasks")]
    NoProvider(TaskType),
    #[error("provider failure for task {task_id}: {source}")]
    ProviderFailure {
        task_id: String,
        #[source]
        source: ProviderError,
    },
    #[error("event at {ts_ms} ms is earlier than already committed events ({watermark} ms)")]
    Backdated { ts_ms: u64, watermark: u64 },
    #[error(transparent)]
    Log(#[from] OplogError),
}

pub const DEFAULT_NUM_IDEAS: u32 = 3;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

/// Simulation time; only moves forward.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: AtomicU64,
}

impl VirtualClock {
    pub fn new(start_ms: u64) -> Self {
        Self {
            now: AtomicU64::new(start_ms),
        }
    }

    pub fn advance(&self, delta_ms: u64) {
        self.now.fetch_add(delta_ms, Ordering::SeqCst);
    }

    /// Moves to `ts_ms` unless the clock is already past it.
    pub fn advance_to(&self, ts_ms: u64) {
        self.now.fetch_max(ts_ms, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct WallClock;

impl Clock for WallClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// A selected span of the draft; offsets in code points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snippet {
    pub text: String,
    pub start: usize,
}

impl Snippet {
    pub fn new(text: impl Into<String>, start: usize) -> Self {
        Self {
            text: text.into(),
            start,
        }
    }

    pub fn len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskParams {
    #[serde(default)]
    pub instruction: Option<String>,
    #[serde(default)]
    pub num_ideas: Option<u32>,
    #[serde(default)]
    pub horizon: Option<Horizon>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuggestionTask {
    pub task_id: String,
    pub doc_id: String,
    pub task_type: TaskType,
    pub snippet: Snippet,
    pub instruction: Option<String>,
    /// Requested ideas per dispatch; always 1 for model-backed types.
    pub num_ideas: u32,
    pub horizon: Option<Horizon>,
    pub created_ts_ms: u64,
}

impl SuggestionTask {
    pub fn to_record(&self) -> TaskCreated {
        TaskCreated {
            task_id: self.task_id.clone(),
            task_type: self.task_type,
            snippet_start: self.snippet.start,
            snippet_len: self.snippet.len(),
            instruction: self.instruction.clone(),
            num_ideas: (self.task_type == TaskType::Crowd).then_some(self.num_ideas),
            horizon: self.horizon,
        }
    }
}

fn validate_params(task_type: TaskType, params: &TaskParams) -> Result<(), OrchestratorError> {
    let invalid = |reason: &str| OrchestratorError::InvalidParams {
        task_type,
        reason: reason.to_string(),
    };
    if params.horizon.is_some() && task_type != TaskType::StoryPlot {
        return Err(invalid("horizon applies to story_plot tasks only"));
    }
    match params.num_ideas {
        Some(_) if task_type != TaskType::Crowd => Err(invalid("num_ideas applies to crowd tasks only")),
        Some(0) => Err(invalid("num_ideas must be at least 1")),
        _ => Ok(()),
    }
}

/// Validates parameters, fills defaults and appends a `task_created` record
/// stamped with the clock's current time.
pub fn create_task(
    doc_id: &str,
    snippet: &Snippet,
    task_type: TaskType,
    params: &TaskParams,
    clock: &dyn Clock,
    log: &mut LogWriter,
) -> Result<SuggestionTask, OrchestratorError> {
    if snippet.is_empty() {
        return Err(OrchestratorError::EmptySnippet);
    }
    validate_params(task_type, params)?;
    let task = SuggestionTask {
        task_id: log.next_task_id(),
        doc_id: doc_id.to_string(),
        task_type,
        snippet: snippet.clone(),
        instruction: params.instruction.clone(),
        num_ideas: match task_type {
            TaskType::Crowd => params.num_ideas.unwrap_or(DEFAULT_NUM_IDEAS),
            _ => 1,
        },
        horizon: match task_type {
            TaskType::StoryPlot => Some(params.horizon.unwrap_or(Horizon::Near)),
            _ => None,
        },
        created_ts_ms: clock.now_ms(),
    };
    log.schedule(task.created_ts_ms, doc_id, EventKind::TaskCreated(task.to_record()))?;
    Ok(task)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// Dollars per crowd idea on top of the per-word charge.
    pub crowd_base: f64,
    pub crowd_fee_multiplier: f64,
    pub completion_budget_tokens: u64,
    pub rate_per_1k_tokens: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            crowd_base: 1.0,
            crowd_fee_multiplier: 1.2,
            completion_budget_tokens: 100,
            rate_per_1k_tokens: 0.02,
        }
    }
}

/// `ceil(code points / 4)`.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub fn estimate_cost(task: &SuggestionTask, model: &CostModel) -> f64 {
    match task.task_type {
        TaskType::Crowd => {
            let words = word_count(&task.snippet.text) as f64;
            task.num_ideas as f64 * (words / 1000.0 + model.crowd_base) * model.crowd_fee_multiplier
        }
        _ => {
            let prompt = format!("{}{}", task.snippet.text, task.instruction.as_deref().unwrap_or(""));
            (estimate_tokens(&prompt) + model.completion_budget_tokens) as f64 * model.rate_per_1k_tokens / 1000.0
        }
    }
}

/// The arc-prompt template, with placeholders substituted verbatim.
pub fn render_plot_prompt(snippet: &str, instruction: &str) -> Result<String, OrchestratorError> {
    if snippet.is_empty() {
        return Err(OrchestratorError::EmptySnippet);
    }
    Ok(format!(
        "Given the previous story: {snippet}.\nFollow the instruction: {instruction} to describe the follow-up story arc using 50 words."
    ))
}

/// Delay distribution in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    Fixed(f64),
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `offset + Exp(mean)`, redrawn while above `cap`.
    Exp {
        #[serde(default)]
        offset: f64,
        mean: f64,
        #[serde(default)]
        cap: Option<f64>,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
}

impl DelayModel {
    /// Lognormal fitted to a median and an interquartile ratio.
    pub fn lognormal_from_quartiles(q25: f64, median: f64, q75: f64) -> Self {
        DelayModel::LogNormal {
            mu: median.ln(),
            sigma: (q75 / q25).ln() / (2.0 * 0.6745),
        }
    }

    pub fn sample(&self, rng: &mut SeededRng) -> f64 {
        match *self {
            DelayModel::Fixed(s) => s,
            DelayModel::Uniform { lo, hi } => rng.uniform_range(lo, hi),
            DelayModel::Exp { offset, mean, cap } => {
                for _ in 0..64 {
                    let x = offset + rng.exponential(mean);
                    if cap.is_none_or(|c| x <= c) {
                        return x;
                    }
                }
                cap.unwrap_or(offset)
            }
            DelayModel::LogNormal { mu, sigma } => rng.lognormal(mu, sigma),
        }
    }

    pub fn sample_ms(&self, rng: &mut SeededRng) -> u64 {
        (self.sample(rng).max(0.0) * 1000.0).round() as u64
    }

    pub fn min_support(&self) -> f64 {
        match *self {
            DelayModel::Fixed(s) => s,
            DelayModel::Uniform { lo, .. } => lo,
            DelayModel::Exp { offset, .. } => offset,
            DelayModel::LogNormal { .. } => 0.0,
        }
    }

    /// `None` when unbounded.
    pub fn max_support(&self) -> Option<f64> {
        match *self {
            DelayModel::Fixed(s) => Some(s),
            DelayModel::Uniform { hi, .. } => Some(hi),
            DelayModel::Exp { cap, .. } => cap,
            DelayModel::LogNormal { sigma, mu } => (sigma == 0.0).then(|| mu.exp()),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            DelayModel::Fixed(s) => s >= 0.0 && s.is_finite(),
            DelayModel::Uniform { lo, hi } => lo >= 0.0 && hi >= lo && hi.is_finite(),
            DelayModel::Exp { offset, mean, cap } => {
                offset >= 0.0 && mean > 0.0 && mean.is_finite() && cap.is_none_or(|c| c >= offset)
            }
            DelayModel::LogNormal { mu, sigma } => mu.is_finite() && sigma >= 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid delay model {self:?}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl Default for LognormalParams {
    /// Median 3,449 s with the 1,753 s / 8,160 s quartile ratio.
    fn default() -> Self {
        Self {
            mu: 3449f64.ln(),
            sigma: (8160.0f64 / 1753.0).ln() / (2.0 * 0.6745),
        }
    }
}

pub fn simulate_crowd_latency(rng: &mut SeededRng, params: LognormalParams) -> f64 {
    rng.lognormal(params.mu, params.sigma)
}

/// Calibrated system-latency model per task type.
pub fn default_latency(task_type: TaskType) -> DelayModel {
    match task_type {
        TaskType::Crowd => {
            let p = LognormalParams::default();
            DelayModel::LogNormal {
                mu: p.mu,
                sigma: p.sigma,
            }
        }
        TaskType::StoryPlot => DelayModel::lognormal_from_quartiles(7.0, 8.0, 10.0),
        TaskType::Gpt3Plot => DelayModel::lognormal_from_quartiles(7.0, 8.0, 9.0),
        TaskType::Gpt3Continuation => DelayModel::lognormal_from_quartiles(9.0, 9.0, 10.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSuggestion {
    pub latency_s: f64,
    pub text: String,
}

pub trait SuggestionProvider: Send + Sync {
    fn name(&self) -> &str;
    fn serves(&self) -> TaskType;
    /// One `(latency, text)` per requested idea.
    fn generate(&self, task: &SuggestionTask, rng: &mut SeededRng) -> Result<Vec<GeneratedSuggestion>, ProviderError>;
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    pub fn sample(&self, rng: &mut SeededRng) -> usize {
        self.min + rng.below((self.max - self.min + 1) as u64) as usize
    }

    pub fn is_valid(&self) -> bool {
        self.min >= 1 && self.min <= self.max
    }
}

/// Builds sentences from a word list. Words are drawn without replacement
/// across one whole suggestion, so no term repeats inside a suggestion.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceGenerator {
    pub vocabulary: Vec<String>,
    pub sentences: IntRange,
    pub words_per_sentence: IntRange,
}

pub fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl SentenceGenerator {
    pub fn max_words(&self) -> usize {
        self.sentences.max * self.words_per_sentence.max
    }

    pub fn generate(&self, rng: &mut SeededRng, lead: Option<&str>) -> String {
        let n_sentences = self.sentences.sample(rng);
        let lengths: Vec<usize> = (0..n_sentences).map(|_| self.words_per_sentence.sample(rng)).collect();
        let total: usize = lengths.iter().sum();
        let picks = rng.sample_indices(self.vocabulary.len(), total);
        let mut words = picks.into_iter().map(|i| self.vocabulary[i].as_str());
        let mut out = Vec::with_capacity(n_sentences);
        for (s, len) in lengths.into_iter().enumerate() {
            let mut sentence: Vec<String> = words.by_ref().take(len).map(str::to_string).collect();
            match (s, lead) {
                (0, Some(lead)) => sentence.insert(0, lead.to_string()),
                _ => sentence[0] = capitalize(&sentence[0]),
            }
            out.push(format!("{}.", sentence.join(" ")));
        }
        out.join(" ")
    }
}

/// Offline provider: latency from a delay model, text from a sentence
/// generator. Story-plot output opens with a horizon marker.
#[derive(Debug, Clone)]
pub struct SimulatedProvider {
    pub task_type: TaskType,
    pub latency: DelayModel,
    pub text: SentenceGenerator,
}

pub fn horizon_marker(h: Horizon) -> &'static str {
    match h {
        Horizon::Near => "Next,",
        Horizon::Far => "Later,",
    }
}

impl SuggestionProvider for SimulatedProvider {
    fn name(&self) -> &str {
        "simulated"
    }

    fn serves(&self) -> TaskType {
        self.task_type
    }

    fn generate(&self, task: &SuggestionTask, rng: &mut SeededRng) -> Result<Vec<GeneratedSuggestion>, ProviderError> {
        let lead = task.horizon.map(horizon_marker);
        Ok((0..task.num_ideas)
            .map(|_| GeneratedSuggestion {
                latency_s: self.latency.sample(rng),
                text: self.text.generate(rng, lead),
            })
            .collect())
    }
}

#[derive(Default)]
pub struct ProviderRegistry {
    providers: BTreeMap<TaskType, Box<dyn SuggestionProvider>>,
}

impl ProviderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, provider: Box<dyn SuggestionProvider>) {
        self.providers.insert(provider.serves(), provider);
    }

    pub fn get(&self, task_type: TaskType) -> Option<&dyn SuggestionProvider> {
        self.providers.get(&task_type).map(|p| p.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suggestion {
    pub suggestion_id: String,
    pub task_id: String,
    pub doc_id: String,
    pub tab_index: u32,
    pub text: String,
    pub delivered_ts_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchFailure {
    pub task_id: String,
    pub at_ms: u64,
    pub message: String,
}

/// Ordered single writer. Events are scheduled with their clock timestamps
/// and receive sequence numbers when committed, in `(ts_ms, scheduling order)`
/// order, so committed events never go backwards.
#[derive(Debug, Default)]
pub struct LogWriter {
    pending: BTreeMap<(u64, u64), (String, EventKind)>,
    committed: Vec<Event>,
    next_order: u64,
    next_seq: u64,
    task_counter: u64,
    tabs: HashMap<String, u32>,
    failures: Vec<DispatchFailure>,
}

impl LogWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_task_id(&mut self) -> String {
        self.task_counter += 1;
        format!("t{}", self.task_counter)
    }

    fn next_tab(&mut self, task_id: &str) -> u32 {
        let tab = self.tabs.entry(task_id.to_string()).or_insert(0);
        *tab += 1;
        *tab - 1
    }

    pub fn watermark(&self) -> Option<u64> {
        self.committed.last().map(|e| e.ts_ms)
    }

    pub fn schedule(&mut self, ts_ms: u64, doc_id: &str, kind: EventKind) -> Result<(), OrchestratorError> {
        if let Some(watermark) = self.watermark() {
            if ts_ms < watermark {
                return Err(OrchestratorError::Backdated { ts_ms, watermark });
            }
        }
        self.pending
            .insert((ts_ms, self.next_order), (doc_id.to_string(), kind));
        self.next_order += 1;
        Ok(())
    }

    pub fn schedule_text_change(&mut self, ts_ms: u64, doc_id: &str, delta: Delta) -> Result<(), OrchestratorError> {
        self.schedule(ts_ms, doc_id, EventKind::TextChange(delta))
    }

    pub fn schedule_read(&mut self, ts_ms: u64, doc_id: &str, suggestion_id: &str) -> Result<(), OrchestratorError> {
        self.schedule(
            ts_ms,
            doc_id,
            EventKind::SuggestionRead(SuggestionRead {
                suggestion_id: suggestion_id.to_string(),
            }),
        )
    }

    /// Commits every pending event with `ts_ms <= until_ms`.
    pub fn flush_until(&mut self, until_ms: u64) {
        while let Some(entry) = self.pending.first_entry() {
            if entry.key().0 > until_ms {
                break;
            }
            let ((ts_ms, _), (doc_id, kind)) = entry.remove_entry();
            self.committed.push(Event {
                seq: self.next_seq,
                ts_ms,
                doc_id,
                kind,
            });
            self.next_seq += 1;
        }
    }

    pub fn committed(&self) -> &[Event] {
        &self.committed
    }

    pub fn failures(&self) -> &[DispatchFailure] {
        &self.failures
    }

    pub fn finish(mut self) -> Result<EventLog, OplogError> {
        self.flush_until(u64::MAX);
        EventLog::from_events(self.committed)
    }
}

/// Dispatches through the provider registered for the task's type.
pub fn dispatch_task(
    task: &SuggestionTask,
    registry: &ProviderRegistry,
    clock: &dyn Clock,
    rng: &mut SeededRng,
    log: &mut LogWriter,
) -> Result<Vec<Suggestion>, OrchestratorError> {
    let provider = registry
        .get(task.task_type)
        .ok_or(OrchestratorError::NoProvider(task.task_type))?;
    dispatch_with(task, provider, clock, rng, log)
}

/// Generates suggestions and schedules one delivery per idea at dispatch time
/// plus latency. Tabs are numbered in delivery order and keep counting across
/// repeated dispatches of the same task.
pub fn dispatch_with(
    task: &SuggestionTask,
    provider: &dyn SuggestionProvider,
    clock: &dyn Clock,
    rng: &mut SeededRng,
    log: &mut LogWriter,
) -> Result<Vec<Suggestion>, OrchestratorError> {
    let base = clock.now_ms();
    let mut generated = match provider.generate(task, rng) {
        Ok(g) => g,
        Err(source) => {
            log.failures.push(DispatchFailure {
                task_id: task.task_id.clone(),
                at_ms: base,
                message: source.to_string(),
            });
            return Err(OrchestratorError::ProviderFailure {
                task_id: task.task_id.clone(),
                source,
            });
        }
    };
    generated.sort_by(|a, b| a.latency_s.total_cmp(&b.latency_s));
    let mut out = Vec::with_capacity(generated.len());
    for g in generated {
        let ts = base + (g.latency_s.max(0.0) * 1000.0).round() as u64;
        let tab_index = log.next_tab(&task.task_id);
        let suggestion = Suggestion {
            suggestion_id: format!("{}-s{}", task.task_id, tab_index),
            task_id: task.task_id.clone(),
            doc_id: task.doc_id.clone(),
            tab_index,
            text: g.text,
            delivered_ts_ms: ts,
        };
        log.schedule(
            ts,
            &task.doc_id,
            EventKind::SuggestionDelivered(SuggestionDelivered {
                task_id: suggestion.task_id.clone(),
                suggestion_id: suggestion.suggestion_id.clone(),
                tab_index,
                text: suggestion.text.clone(),
            }),
        )?;
        out.push(suggestion);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    Virtual,
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClockConfig {
    pub mode: ClockMode,
    pub start_ms: u64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self {
            mode: ClockMode::Virtual,
            start_ms: 1_700_000_000_000,
        }
    }
}

/// Per-type provider configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    Simulated {
        #[serde(default)]
        latency: Option<DelayModel>,
        #[serde(default = "default_suggestion_sentences")]
        sentences: IntRange,
        #[serde(default = "default_sentence_words")]
        words_per_sentence: IntRange,
    },
    Remote(RemoteCompletionConfig),
}

pub fn default_suggestion_sentences() -> IntRange {
    IntRange::new(2, 4)
}

pub fn default_sentence_words() -> IntRange {
    IntRange::new(6, 12)
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Simulated {
            latency: None,
            sentences: default_suggestion_sentences(),
            words_per_sentence: default_sentence_words(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteCompletionConfig {
    pub endpoint: String,
    #[serde(default = "default_model_id")]
    pub model: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
}

pub fn default_model_id() -> String {
    "text-davanci-003".to_string()
}

fn default_max_tokens() -> u32 {
    100
}

fn default_temperature() -> f64 {
    0.8
}

pub fn default_timeout_s() -> f64 {
    30.0
}

/// `providers`, `cost_model` and `clock` sections of a configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    pub providers: BTreeMap<TaskType, ProviderConfig>,
    pub cost_model: CostModel,
    pub clock: ClockConfig,
}

impl OrchestratorConfig {
    /// Registry for every task type; types missing from the config get a
    /// default simulated provider drawing from `vocabulary`.
    pub fn build_registry(&self, vocabulary: &[String]) -> Result<ProviderRegistry, String> {
        let mut registry = ProviderRegistry::new();
        for task_type in TaskType::ALL {
            let config = self.providers.get(&task_type).cloned().unwrap_or_default();
            match config {
                ProviderConfig::Simulated {
                    latency,
                    sentences,
                    words_per_sentence,
                } => {
                    let latency = latency.unwrap_or_else(|| default_latency(task_type));
                    latency.validate()?;
                    if !sentences.is_valid() || !words_per_sentence.is_valid() {
                        return Err(format!("{task_type}: sentence ranges must satisfy 1 <= min <= max"));
                    }
                    let text = SentenceGenerator {
                        vocabulary: vocabulary.to_vec(),
                        sentences,
                        words_per_sentence,
                    };
                    if text.max_words() > vocabulary.len() {
                        return Err(format!(
                            "{task_type}: suggestions need up to {} distinct words but the vocabulary has {}",
                            text.max_words(),
                            vocabulary.len()
                        ));
                    }
                    registry.register(Box::new(SimulatedProvider {
                        task_type,
                        latency,
                        text,
                    }));
                }
                ProviderConfig::Remote(remote) => {
                    registry.register(remote_provider(task_type, remote)?);
                }
            }
        }
        Ok(registry)
    }
}

#[cfg(feature = "remote")]
fn remote_provider(task_type: TaskType, config: RemoteCompletionConfig) -> Result<Box<dyn SuggestionProvider>, String> {
    crate::remote::RemoteCompletionProvider::from_env(task_type, config)
        .map(|p| Box::new(p) as Box<dyn SuggestionProvider>)
        .map_err(|e| e.to_string())
}

#[cfg(not(feature = "remote"))]
fn remote_provider(
    task_type: TaskType,
    _config: RemoteCompletionConfig,
) -> Result<Box<dyn SuggestionProvider>, String> {
    Err(format!("{task_type}: remote providers need the `remote` feature"))
}
