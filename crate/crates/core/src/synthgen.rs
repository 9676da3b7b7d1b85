//! Synthetic writing worlds with planted ground truth: typing sessions,
//! suggestion requests, reads and adoptions. The same world builder drives
//! the orchestrator simulation, with suggestions coming from a provider
//! registry instead of the plan's own latency models.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oplog::{Delta, EventLog, Horizon, OplogError, Replayer, TaskType};
use crate::orchestrator::{
    capitalize, create_task, default_latency, dispatch_with, estimate_cost, Clock, ClockMode, CostModel, DelayModel,
    IntRange, LogWriter, OrchestratorConfig, OrchestratorError, SentenceGenerator, SimulatedProvider, Snippet,
    SuggestionProvider, TaskParams, VirtualClock, WallClock,
};
use crate::stats::SeededRng;
use crate::textmetrics::{split_sentences, word_count};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Log(#[from] OplogError),
    #[error("generated log disagrees with ground truth: {0}")]
    Inconsistent(String),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidConfig(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub typed: Vec<String>,
    pub suggested: Vec<String>,
}

fn cvcv(consonants: &str, vowels: &str) -> Vec<String> {
    let mut out = Vec::new();
    for c1 in consonants.chars() {
        for v1 in vowels.chars() {
            for c2 in consonants.chars() {
                for v2 in vowels.chars() {
                    out.push([c1, v1, c2, v2].iter().collect());
                }
            }
        }
    }
    out
}

impl Default for Vocabulary {
    /// Two pseudo-word lists over disjoint letters, so typed prose and
    /// suggestions share neither terms nor characters.
    fn default() -> Self {
        Self {
            typed: cvcv("bdfgklm", "ao"),
            suggested: cvcv("nprstvz", "eiu"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adoption {
    #[default]
    None,
    Verbatim,
    /// Keeps a fraction `strength` of the sentence's words and swaps the
    /// rest for typed vocabulary.
    Paraphrase {
        strength: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanItem {
    pub task_type: TaskType,
    pub count: usize,
    /// Delivery latency; calibrated per-type default when absent.
    #[serde(default)]
    pub latency: Option<DelayModel>,
    /// Delay from delivery to read; calibrated per-type default when absent.
    #[serde(default)]
    pub read_delay: Option<DelayModel>,
    /// Probability that a task's suggestions get read at all.
    #[serde(default)]
    pub read_prob: Option<f64>,
    #[serde(default)]
    pub adoption: Adoption,
    #[serde(default)]
    pub num_ideas: Option<u32>,
    #[serde(default)]
    pub horizon: Option<Horizon>,
    #[serde(default)]
    pub instruction: Option<String>,
    #[serde(default = "crate::orchestrator::default_suggestion_sentences")]
    pub sentences: IntRange,
}

impl PlanItem {
    pub fn new(task_type: TaskType, count: usize) -> Self {
        Self {
            task_type,
            count,
            latency: None,
            read_delay: None,
            read_prob: None,
            adoption: Adoption::None,
            num_ideas: None,
            horizon: None,
            instruction: None,
            sentences: crate::orchestrator::default_suggestion_sentences(),
        }
    }

    fn latency_model(&self) -> DelayModel {
        self.latency.clone().unwrap_or_else(|| default_latency(self.task_type))
    }

    fn read_model(&self) -> DelayModel {
        self.read_delay
            .clone()
            .unwrap_or_else(|| default_read_delay(self.task_type))
    }

    fn read_probability(&self) -> f64 {
        self.read_prob.unwrap_or_else(|| default_read_prob(self.task_type))
    }

    fn params(&self) -> TaskParams {
        TaskParams {
            instruction: self.instruction.clone(),
            num_ideas: self.num_ideas,
            horizon: self.horizon,
        }
    }
}

/// Calibrated delivery-to-read delay per task type.
pub fn default_read_delay(task_type: TaskType) -> DelayModel {
    match task_type {
        TaskType::Crowd => DelayModel::lognormal_from_quartiles(21_881.0, 34_429.0, 73_652.0),
        TaskType::StoryPlot => DelayModel::lognormal_from_quartiles(15.0, 115.0, 538.0),
        TaskType::Gpt3Plot => DelayModel::lognormal_from_quartiles(8.0, 20.0, 74.0),
        TaskType::Gpt3Continuation => DelayModel::lognormal_from_quartiles(4.0, 13.0, 84.0),
    }
}

/// Calibrated share of tasks whose suggestions get opened.
pub fn default_read_prob(task_type: TaskType) -> f64 {
    match task_type {
        TaskType::Crowd => 1.0 - 11.0 / 30.0,
        TaskType::StoryPlot => 1.0 - 9.0 / 45.0,
        TaskType::Gpt3Plot => 1.0 - 5.0 / 37.0,
        TaskType::Gpt3Continuation => 1.0 - 10.0 / 61.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub start_ms: u64,
    pub docs: usize,
    /// Sessions per document.
    pub n_sessions: usize,
    pub words_per_session: IntRange,
    pub sentence_words: IntRange,
    pub within_gap_s: DelayModel,
    /// When set, words arrive exactly `60 / rate` seconds apart inside a session.
    pub typing_words_per_min: Option<f64>,
    pub between_gap_s: DelayModel,
    pub suggestion_plan: Vec<PlanItem>,
    pub vocabulary: Option<Vocabulary>,
    pub adopt_delay_s: f64,
    pub snippet_chars: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            start_ms: 1_700_000_000_000,
            docs: 1,
            n_sessions: 8,
            words_per_session: IntRange::new(80, 200),
            sentence_words: IntRange::new(6, 12),
            within_gap_s: DelayModel::Exp {
                offset: 1.0,
                mean: 3.0,
                cap: Some(30.0),
            },
            typing_words_per_min: None,
            between_gap_s: DelayModel::Exp {
                offset: 1800.0,
                mean: 600.0,
                cap: None,
            },
            suggestion_plan: Vec::new(),
            vocabulary: None,
            adopt_delay_s: 45.0,
            snippet_chars: 400,
        }
    }
}

impl SynthConfig {
    pub fn vocabulary(&self) -> Vocabulary {
        self.vocabulary.clone().unwrap_or_default()
    }

    fn within_gap(&self) -> DelayModel {
        match self.typing_words_per_min {
            Some(rate) => DelayModel::Fixed(60.0 / rate),
            None => self.within_gap_s.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.docs == 0 || self.n_sessions == 0 {
            return Err(invalid("docs and n_sessions must be at least 1"));
        }
        if !self.words_per_session.is_valid() || !self.sentence_words.is_valid() {
            return Err(invalid("word ranges must satisfy 1 <= min <= max"));
        }
        if let Some(rate) = self.typing_words_per_min {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(invalid("typing_words_per_min must be positive"));
            }
        }
        let within = self.within_gap();
        within.validate().map_err(invalid)?;
        self.between_gap_s.validate().map_err(invalid)?;
        match within.max_support() {
            Some(hi) if hi < self.between_gap_s.min_support() => {}
            Some(_) => return Err(invalid("within-session gaps must stay below between-session gaps")),
            None => return Err(invalid("within-session gap distribution must be bounded")),
        }
        if !(self.adopt_delay_s > 0.0 && self.adopt_delay_s.is_finite()) {
            return Err(invalid("adopt_delay_s must be positive"));
        }
        if self.snippet_chars == 0 {
            return Err(invalid("snippet_chars must be positive"));
        }
        let vocab = self.vocabulary();
        if vocab.typed.is_empty() || vocab.suggested.is_empty() {
            return Err(invalid("vocabularies must be non-empty"));
        }
        let typed: HashSet<String> = vocab.typed.iter().map(|w| w.to_lowercase()).collect();
        if vocab.suggested.iter().any(|w| typed.contains(&w.to_lowercase())) {
            return Err(invalid("typed and suggested vocabularies must be disjoint"));
        }
        for w in vocab.typed.iter().chain(&vocab.suggested) {
            if word_count(w) != 1 || w.chars().any(|c| !c.is_alphanumeric()) {
                return Err(invalid(format!(
                    "vocabulary entry {w:?} must be a single alphanumeric word"
                )));
            }
        }
        for item in &self.suggestion_plan {
            let ty = item.task_type;
            if !item.sentences.is_valid() {
                return Err(invalid(format!("{ty}: sentence range must satisfy 1 <= min <= max")));
            }
            let needed = item.sentences.max * self.sentence_words.max;
            if needed > vocab.suggested.len() {
                return Err(invalid(format!(
                    "{ty}: suggestions need up to {needed} distinct words, suggested vocabulary has {}",
                    vocab.suggested.len()
                )));
            }
            item.latency_model().validate().map_err(invalid)?;
            item.read_model().validate().map_err(invalid)?;
            let p = item.read_probability();
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{ty}: read_prob must lie in [0, 1]")));
            }
            if let Adoption::Paraphrase { strength } = item.adoption {
                if !(0.0..=1.0).contains(&strength) {
                    return Err(invalid(format!("{ty}: paraphrase strength must lie in [0, 1]")));
                }
                if vocab.typed.len() < self.sentence_words.max + 1 {
                    return Err(invalid("typed vocabulary too small for paraphrase adoption"));
                }
            }
        }
        Ok(())
    }
}

/// Session as generated, before any paste extends it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedSession {
    pub doc_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionRecord {
    pub task_id: String,
    pub suggestion_id: String,
    pub doc_id: String,
    pub read_ts_ms: u64,
    pub paste_ts_ms: u64,
    pub source_sentence: String,
    pub pasted_sentence: String,
    /// Lexical cosine between source and pasted sentence.
    pub expected_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedRead {
    pub suggestion_id: String,
    pub task_id: String,
    pub doc_id: String,
    pub read_ts_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedDelivery {
    pub task_id: String,
    pub task_type: TaskType,
    pub created_ts_ms: u64,
    pub delivered_ts_ms: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedProgress {
    pub suggestion_id: String,
    pub read_ts_ms: u64,
    pub window_s: u64,
    pub word_delta: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sessions: Vec<PlantedSession>,
    pub requests: BTreeMap<TaskType, usize>,
    pub deliveries: Vec<PlantedDelivery>,
    pub reads: Vec<PlantedRead>,
    pub adoptions: Vec<AdoptionRecord>,
    pub expected_progress: Vec<ExpectedProgress>,
    pub estimated_cost: f64,
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }
}

/// Sidecar path for the ground truth of `log_path`.
pub fn truth_path(log_path: &str) -> String {
    format!("{log_path}.truth.json")
}

pub const PROGRESS_WINDOWS_S: [u64; 2] = [300, 180];

#[derive(Debug, Clone)]
struct TypedWord {
    ts_ms: u64,
    word: String,
    starts_sentence: bool,
    ends_sentence: bool,
}

fn typing_timeline(
    config: &SynthConfig,
    vocab: &[String],
    rng: &mut SeededRng,
    doc_id: &str,
) -> (Vec<TypedWord>, Vec<PlantedSession>) {
    let within = config.within_gap();
    let mut words = Vec::new();
    let mut sessions = Vec::new();
    let mut t_ms = config.start_ms;
    let mut left_in_sentence = 0;
    for s in 0..config.n_sessions {
        if s > 0 {
            t_ms += config.between_gap_s.sample_ms(rng);
        }
        let start = t_ms;
        for w in 0..config.words_per_session.sample(rng) {
            if w > 0 {
                t_ms += within.sample_ms(rng);
            }
            let starts_sentence = left_in_sentence == 0;
            if starts_sentence {
                left_in_sentence = config.sentence_words.sample(rng);
            }
            left_in_sentence -= 1;
            words.push(TypedWord {
                ts_ms: t_ms,
                word: vocab[rng.below(vocab.len() as u64) as usize].clone(),
                starts_sentence,
                ends_sentence: left_in_sentence == 0,
            });
        }
        sessions.push(PlantedSession {
            doc_id: doc_id.to_string(),
            start_ms: start,
            end_ms: t_ms,
        });
    }
    (words, sessions)
}

/// Replays one document's typing and pastes in time order, emitting deltas.
struct DocSim {
    doc_id: String,
    words: Vec<TypedWord>,
    next_word: usize,
    pastes: BTreeMap<(u64, u64), String>,
    paste_counter: u64,
    buf: Vec<char>,
    /// Offset where the sentence being typed starts, if one is open.
    open_sentence: Option<usize>,
    /// `(ts_ms, words)` of every applied change.
    word_log: Vec<(u64, usize)>,
}

impl DocSim {
    fn new(doc_id: &str, words: Vec<TypedWord>) -> Self {
        Self {
            doc_id: doc_id.to_string(),
            words,
            next_word: 0,
            pastes: BTreeMap::new(),
            paste_counter: 0,
            buf: Vec::new(),
            open_sentence: None,
            word_log: Vec::new(),
        }
    }

    fn schedule_paste(&mut self, ts_ms: u64, sentence: String) {
        self.pastes.insert((ts_ms, self.paste_counter), sentence);
        self.paste_counter += 1;
    }

    fn insert(&mut self, ts_ms: u64, offset: usize, text: &str, log: &mut LogWriter) -> Result<(), SynthError> {
        log.schedule_text_change(ts_ms, &self.doc_id, Delta::insert_at(offset, text))?;
        self.buf.splice(offset..offset, text.chars());
        Ok(())
    }

    fn type_word(&mut self, log: &mut LogWriter) -> Result<(), SynthError> {
        let w = self.words[self.next_word].clone();
        self.next_word += 1;
        let lead = if self.buf.is_empty() { "" } else { " " };
        let mut text = format!(
            "{lead}{}",
            if w.starts_sentence {
                capitalize(&w.word)
            } else {
                w.word.clone()
            }
        );
        if w.ends_sentence {
            text.push('.');
        }
        if w.starts_sentence {
            self.open_sentence = Some(self.buf.len() + lead.len());
        }
        let end = self.buf.len();
        self.insert(w.ts_ms, end, &text, log)?;
        if w.ends_sentence {
            self.open_sentence = None;
        }
        self.word_log.push((w.ts_ms, 1));
        Ok(())
    }

    fn paste(&mut self, ts_ms: u64, sentence: &str, log: &mut LogWriter) -> Result<(), SynthError> {
        match self.open_sentence {
            Some(at) => {
                let text = format!("{sentence} ");
                self.insert(ts_ms, at, &text, log)?;
                self.open_sentence = Some(at + text.chars().count());
            }
            None => {
                let lead = if self.buf.is_empty() { "" } else { " " };
                let end = self.buf.len();
                self.insert(ts_ms, end, &format!("{lead}{sentence}"), log)?;
            }
        }
        self.word_log.push((ts_ms, word_count(sentence)));
        Ok(())
    }

    /// Applies everything up to and including `t_ms`; typing goes first on ties.
    fn advance_to(&mut self, t_ms: u64, log: &mut LogWriter) -> Result<(), SynthError> {
        loop {
            let word_ts = self.words.get(self.next_word).map(|w| w.ts_ms);
            let paste_ts = self.pastes.first_key_value().map(|(k, _)| k.0);
            match (word_ts, paste_ts) {
                (Some(w), p) if w <= t_ms && p.is_none_or(|p| w <= p) => self.type_word(log)?,
                (_, Some(p)) if p <= t_ms => {
                    let ((ts, _), sentence) = self.pastes.pop_first().expect("non-empty");
                    self.paste(ts, &sentence, log)?;
                }
                _ => return Ok(()),
            }
        }
    }

    fn snippet(&self, max_chars: usize) -> Snippet {
        let start = self.buf.len().saturating_sub(max_chars);
        Snippet::new(self.buf[start..].iter().collect::<String>(), start)
    }

    fn words_between(&self, from_ms: u64, to_ms: u64) -> i64 {
        self.word_log
            .iter()
            .filter(|(ts, _)| *ts > from_ms && *ts <= to_ms)
            .map(|(_, n)| *n as i64)
            .sum()
    }
}

/// The time itself when inside a session, the next session's start when in
/// a gap, `None` after the last session.
fn snap_into_sessions(t_ms: u64, sessions: &[PlantedSession]) -> Option<u64> {
    sessions.iter().find(|s| t_ms <= s.end_ms).map(|s| t_ms.max(s.start_ms))
}

/// Replaces `round((1 - strength) * n)` of the sentence's `n` words with
/// fresh typed words. With distinct words on both sides the lexical cosine
/// to the source is `(n - m) / n`.
fn paraphrase(sentence: &str, strength: f64, typed: &[String], rng: &mut SeededRng) -> (String, f64) {
    let mut words: Vec<String> = sentence.split_whitespace().map(str::to_string).collect();
    let n = words.len();
    let m = (((1.0 - strength) * n as f64).round() as usize).min(n);
    let positions = rng.sample_indices(n, m);
    let replacements = rng.sample_indices(typed.len(), m);
    for (&pos, &r) in positions.iter().zip(&replacements) {
        let old = &words[pos];
        let core_end = old
            .char_indices()
            .rfind(|(_, c)| c.is_alphanumeric())
            .map_or(0, |(i, c)| i + c.len_utf8());
        let tail = old[core_end..].to_string();
        let fresh = if pos == 0 {
            capitalize(&typed[r])
        } else {
            typed[r].clone()
        };
        words[pos] = format!("{fresh}{tail}");
    }
    (words.join(" "), (n - m) as f64 / n as f64)
}

struct Request<'p> {
    index: usize,
    item: &'p PlanItem,
    provider: &'p dyn SuggestionProvider,
    doc: usize,
    created_ms: u64,
}

/// Builds the world with one provider per plan item.
fn build_world(
    config: &SynthConfig,
    providers: &[&dyn SuggestionProvider],
    clock: &VirtualClock,
    cost_model: &CostModel,
) -> Result<(EventLog, GroundTruth), SynthError> {
    config.validate()?;
    let vocab = config.vocabulary();
    let root = SeededRng::new(config.seed);
    let doc_ids: Vec<String> = (0..config.docs).map(|d| format!("doc{d}")).collect();
    let mut truth = GroundTruth::default();
    let mut sims = Vec::with_capacity(config.docs);
    let mut doc_sessions = Vec::with_capacity(config.docs);
    for (d, doc_id) in doc_ids.iter().enumerate() {
        let mut rng = root.split(d as u64);
        let (words, sessions) = typing_timeline(config, &vocab.typed, &mut rng, doc_id);
        sims.push(DocSim::new(doc_id, words));
        truth.sessions.extend(sessions.iter().cloned());
        doc_sessions.push(sessions);
    }

    let mut placement = root.split(1 << 32);
    let mut requests = Vec::new();
    for (item, provider) in config.suggestion_plan.iter().zip(providers) {
        for _ in 0..item.count {
            let index = requests.len();
            let doc = index % config.docs;
            let sessions = &doc_sessions[doc];
            let weights: Vec<f64> = sessions.iter().map(|s| (s.end_ms - s.start_ms) as f64).collect();
            let s = &sessions[placement.choose_weighted(&weights).unwrap_or(0)];
            let created_ms = s.start_ms + placement.below(s.end_ms - s.start_ms + 1);
            requests.push(Request {
                index,
                item,
                provider: *provider,
                doc,
                created_ms,
            });
            *truth.requests.entry(item.task_type).or_default() += 1;
        }
    }
    requests.sort_by_key(|r| (r.created_ms, r.index));

    let mut log = LogWriter::new();
    let mut read_ids = Vec::new();
    for req in &requests {
        let mut rng = root.split((1 << 33) + req.index as u64);
        let doc_id = &doc_ids[req.doc];
        let sim = &mut sims[req.doc];
        sim.advance_to(req.created_ms, &mut log)?;
        clock.advance_to(req.created_ms);
        let snippet = sim.snippet(config.snippet_chars);
        let task = create_task(
            doc_id,
            &snippet,
            req.item.task_type,
            &req.item.params(),
            clock,
            &mut log,
        )?;
        truth.estimated_cost += estimate_cost(&task, cost_model);
        let suggestions = dispatch_with(&task, req.provider, clock, &mut rng, &mut log)?;
        truth.deliveries.push(PlantedDelivery {
            task_id: task.task_id.clone(),
            task_type: task.task_type,
            created_ts_ms: task.created_ts_ms,
            delivered_ts_ms: suggestions.iter().map(|s| s.delivered_ts_ms).collect(),
        });

        if !rng.bernoulli(req.item.read_probability()) {
            continue;
        }
        let read_model = req.item.read_model();
        let mut first: Option<(u64, usize)> = None;
        for (k, s) in suggestions.iter().enumerate() {
            let raw = s.delivered_ts_ms + read_model.sample_ms(&mut rng);
            let Some(read_ts) = snap_into_sessions(raw, &doc_sessions[req.doc]) else {
                continue;
            };
            log.schedule_read(read_ts, doc_id, &s.suggestion_id)?;
            truth.reads.push(PlantedRead {
                suggestion_id: s.suggestion_id.clone(),
                task_id: task.task_id.clone(),
                doc_id: doc_id.clone(),
                read_ts_ms: read_ts,
            });
            read_ids.push((req.doc, s.suggestion_id.clone(), read_ts));
            if first.is_none_or(|(ts, _)| read_ts < ts) {
                first = Some((read_ts, k));
            }
        }

        let Some((read_ts, k)) = first else { continue };
        if req.item.adoption == Adoption::None {
            continue;
        }
        let chosen = &suggestions[k];
        let sentences = split_sentences(&chosen.text);
        if sentences.is_empty() {
            continue;
        }
        let source = sentences[rng.below(sentences.len() as u64) as usize]
            .text
            .trim()
            .to_string();
        let (pasted, expected_cosine) = match req.item.adoption {
            Adoption::Paraphrase { strength } => paraphrase(&source, strength, &vocab.typed, &mut rng),
            _ => (source.clone(), 1.0),
        };
        let paste_ts = read_ts + (config.adopt_delay_s * 1000.0).round() as u64;
        sims[req.doc].schedule_paste(paste_ts, pasted.clone());
        truth.adoptions.push(AdoptionRecord {
            task_id: task.task_id.clone(),
            suggestion_id: chosen.suggestion_id.clone(),
            doc_id: doc_id.clone(),
            read_ts_ms: read_ts,
            paste_ts_ms: paste_ts,
            source_sentence: source,
            pasted_sentence: pasted,
            expected_cosine,
        });
    }
    for sim in &mut sims {
        sim.advance_to(u64::MAX, &mut log)?;
    }

    for (doc, suggestion_id, read_ts) in read_ids {
        for window_s in PROGRESS_WINDOWS_S {
            truth.expected_progress.push(ExpectedProgress {
                suggestion_id: suggestion_id.clone(),
                read_ts_ms: read_ts,
                window_s,
                word_delta: sims[doc].words_between(read_ts, read_ts + window_s * 1000),
            });
        }
    }
    truth
        .reads
        .sort_by(|a, b| (a.read_ts_ms, &a.suggestion_id).cmp(&(b.read_ts_ms, &b.suggestion_id)));

    let log = log.finish()?;
    check_adoptions(&log, &truth)?;
    Ok((log, truth))
}

fn contains_sentence(text: &str, sentence: &str) -> bool {
    split_sentences(text).iter().any(|s| s.text.trim() == sentence)
}

fn check_adoptions(log: &EventLog, truth: &GroundTruth) -> Result<(), SynthError> {
    let mut replayers = BTreeMap::new();
    for a in &truth.adoptions {
        if !replayers.contains_key(&a.doc_id) {
            replayers.insert(a.doc_id.clone(), Replayer::new(log, &a.doc_id)?);
        }
        let r = &replayers[&a.doc_id];
        let present = contains_sentence(&r.text_at(a.paste_ts_ms), &a.pasted_sentence)
            && contains_sentence(&r.text_at(a.paste_ts_ms + 1), &a.pasted_sentence);
        let earlier = contains_sentence(&r.text_at(a.paste_ts_ms - 1), &a.pasted_sentence);
        if !present || earlier {
            return Err(SynthError::Inconsistent(format!(
                "adoption of {} at {} ms",
                a.suggestion_id, a.paste_ts_ms
            )));
        }
    }
    Ok(())
}

/// Generates a world whose suggestions come from each plan item's own
/// latency model over the suggested vocabulary.
pub fn generate_log(config: &SynthConfig) -> Result<(EventLog, GroundTruth), SynthError> {
    config.validate()?;
    let vocab = config.vocabulary();
    let owned: Vec<SimulatedProvider> = config
        .suggestion_plan
        .iter()
        .map(|item| SimulatedProvider {
            task_type: item.task_type,
            latency: item.latency_model(),
            text: SentenceGenerator {
                vocabulary: vocab.suggested.clone(),
                sentences: item.sentences,
                words_per_sentence: config.sentence_words,
            },
        })
        .collect();
    let providers: Vec<&dyn SuggestionProvider> = owned.iter().map(|p| p as &dyn SuggestionProvider).collect();
    let clock = VirtualClock::new(config.start_ms);
    build_world(config, &providers, &clock, &CostModel::default())
}

/// `world` plus the orchestrator sections (`providers`, `cost_model`,
/// `clock`) of a simulation config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimulationConfig {
    #[serde(flatten)]
    pub orchestrator: OrchestratorConfig,
    #[serde(default)]
    pub world: SynthConfig,
}

/// Runs the world through the orchestrator's provider registry on a virtual
/// clock. In wall mode the timeline starts at the current time.
pub fn simulate(config: &SimulationConfig) -> Result<(EventLog, GroundTruth), SynthError> {
    let mut world = config.world.clone();
    world.start_ms = match config.orchestrator.clock.mode {
        ClockMode::Virtual => config.orchestrator.clock.start_ms,
        ClockMode::Wall => WallClock.now_ms(),
    };
    world.validate()?;
    let vocab = world.vocabulary();
    let registry = config.orchestrator.build_registry(&vocab.suggested).map_err(invalid)?;
    let mut providers = Vec::with_capacity(world.suggestion_plan.len());
    for item in &world.suggestion_plan {
        providers.push(
            registry
                .get(item.task_type)
                .ok_or(OrchestratorError::NoProvider(item.task_type))?,
        );
    }
    let clock = VirtualClock::new(world.start_ms);
    build_world(&world, &providers, &clock, &config.orchestrator.cost_model)
}

/// Distinct task types of a plan, in plan order.
pub fn plan_types(config: &SynthConfig) -> Vec<TaskType> {
    let mut seen = BTreeSet::new();
    config
        .suggestion_plan
        .iter()
        .map(|i| i.task_type)
        .filter(|t| seen.insert(*t))
        .collect()
}
