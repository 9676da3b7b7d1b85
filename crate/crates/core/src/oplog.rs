//! Event-log data model, JSONL ingestion and document reconstruction.
//!
//! A log is an append-only list of records. Text-change records carry a
//! [`Delta`] (retain/insert/delete over Unicode scalar values); the other
//! records track the lifecycle of suggestion tasks. Folding every delta of a
//! document with `ts_ms <= t`, in `(ts_ms, seq)` order, over the empty string
//! yields the document as it was at `t`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OplogError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: unknown record kind `{kind}`")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: negative {op} count")]
    NegativeCount { line: usize, op: &'static str },
    #[error("dangling reference to {0}")]
    DanglingReference(Reference),
    #[error("duplicate identifier {0}")]
    DuplicateId(Reference),
    #[error("duplicate event (ts_ms={ts_ms}, seq={seq})")]
    DuplicateEvent { ts_ms: u64, seq: u64 },
    #[error("delta spans {needed} code points but the document has {available}")]
    SpanOverflow { needed: usize, available: usize },
    #[error("unknown document `{0}`")]
    UnknownDocument(String),
}

/// Identifier named by a referential-integrity error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reference {
    Task(String),
    Suggestion(String),
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::Task(id) => write!(f, "task `{id}`"),
            Reference::Suggestion(id) => write!(f, "suggestion `{id}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OpComponent {
    Retain(usize),
    Insert(String),
    Delete(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Delta {
    pub components: Vec<OpComponent>,
}

impl Delta {
    pub fn new(components: Vec<OpComponent>) -> Self {
        Self { components }
    }

    /// Delta that appends `text` to a document of `doc_len` code points.
    pub fn append(doc_len: usize, text: impl Into<String>) -> Self {
        Self::insert_at(doc_len, text)
    }

    pub fn insert_at(offset: usize, text: impl Into<String>) -> Self {
        let mut components = Vec::with_capacity(2);
        if offset > 0 {
            components.push(OpComponent::Retain(offset));
        }
        components.push(OpComponent::Insert(text.into()));
        Self { components }
    }

    /// Retained plus deleted code points, i.e. how much of the input is consumed.
    pub fn span(&self) -> usize {
        self.components
            .iter()
            .map(|c| match c {
                OpComponent::Retain(n) | OpComponent::Delete(n) => *n,
                OpComponent::Insert(_) => 0,
            })
            .sum()
    }

    pub fn inserted_len(&self) -> usize {
        self.components
            .iter()
            .map(|c| match c {
                OpComponent::Insert(s) => s.chars().count(),
                _ => 0,
            })
            .sum()
    }

    pub fn deleted_len(&self) -> usize {
        self.components
            .iter()
            .map(|c| match c {
                OpComponent::Delete(n) => *n,
                _ => 0,
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Crowd,
    StoryPlot,
    Gpt3Plot,
    Gpt3Continuation,
}

impl TaskType {
    pub const ALL: [TaskType; 4] = [
        TaskType::Crowd,
        TaskType::StoryPlot,
        TaskType::Gpt3Plot,
        TaskType::Gpt3Continuation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Crowd => "crowd",
            TaskType::StoryPlot => "story_plot",
            TaskType::Gpt3Plot => "gpt3_plot",
            TaskType::Gpt3Continuation => "gpt3_continuation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Story-plot forecast horizon: the next 20 (near) or 100 (far) sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Near,
    Far,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCreated {
    pub task_id: String,
    pub task_type: TaskType,
    pub snippet_start: usize,
    pub snippet_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_ideas: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Horizon>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionDelivered {
    pub task_id: String,
    pub suggestion_id: String,
    pub tab_index: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionRead {
    pub suggestion_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    TextChange(Delta),
    TaskCreated(TaskCreated),
    SuggestionDelivered(SuggestionDelivered),
    SuggestionRead(SuggestionRead),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::TextChange(_) => "text_change",
            EventKind::TaskCreated(_) => "task_created",
            EventKind::SuggestionDelivered(_) => "suggestion_delivered",
            EventKind::SuggestionRead(_) => "suggestion_read",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub seq: u64,
    pub ts_ms: u64,
    pub doc_id: String,
    pub kind: EventKind,
}

impl Event {
    pub fn sort_key(&self) -> (u64, u64) {
        (self.ts_ms, self.seq)
    }

    pub fn delta(&self) -> Option<&Delta> {
        match &self.kind {
            EventKind::TextChange(d) => Some(d),
            _ => None,
        }
    }

    /// One JSONL record, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        let mut obj = Map::new();
        obj.insert("seq".into(), Value::from(self.seq));
        obj.insert("ts_ms".into(), Value::from(self.ts_ms));
        obj.insert("doc".into(), Value::from(self.doc_id.clone()));
        obj.insert("kind".into(), Value::from(self.kind.name()));
        let payload = match &self.kind {
            EventKind::TextChange(delta) => {
                let ops = delta
                    .components
                    .iter()
                    .map(|c| {
                        let mut op = Map::new();
                        match c {
                            OpComponent::Retain(n) => op.insert("retain".into(), Value::from(*n)),
                            OpComponent::Insert(s) => op.insert("insert".into(), Value::from(s.clone())),
                            OpComponent::Delete(n) => op.insert("delete".into(), Value::from(*n)),
                        };
                        Value::Object(op)
                    })
                    .collect();
                let mut m = Map::new();
                m.insert("ops".into(), Value::Array(ops));
                m
            }
            EventKind::TaskCreated(t) => to_object(t),
            EventKind::SuggestionDelivered(d) => to_object(d),
            EventKind::SuggestionRead(r) => to_object(r),
        };
        obj.extend(payload);
        Value::Object(obj).to_string()
    }
}

fn to_object<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("record payloads serialize to objects"),
    }
}

/// Immutable, sorted event log with a per-document index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    events: Vec<Event>,
    docs: BTreeMap<String, Vec<usize>>,
}

impl EventLog {
    /// Stable-sorts by `(ts_ms, seq)` and checks uniqueness and referential integrity.
    pub fn from_events(mut events: Vec<Event>) -> Result<Self, OplogError> {
        events.sort_by_key(Event::sort_key);
        for pair in events.windows(2) {
            if pair[0].sort_key() == pair[1].sort_key() {
                return Err(OplogError::DuplicateEvent {
                    ts_ms: pair[0].ts_ms,
                    seq: pair[0].seq,
                });
            }
        }

        let mut tasks = HashSet::new();
        let mut suggestions = HashSet::new();
        for ev in &events {
            match &ev.kind {
                EventKind::TaskCreated(t) => {
                    if !tasks.insert(t.task_id.as_str()) {
                        return Err(OplogError::DuplicateId(Reference::Task(t.task_id.clone())));
                    }
                }
                EventKind::SuggestionDelivered(d) => {
                    if !suggestions.insert(d.suggestion_id.as_str()) {
                        return Err(OplogError::DuplicateId(Reference::Suggestion(d.suggestion_id.clone())));
                    }
                }
                _ => {}
            }
        }
        for ev in &events {
            match &ev.kind {
                EventKind::SuggestionDelivered(d) if !tasks.contains(d.task_id.as_str()) => {
                    return Err(OplogError::DanglingReference(Reference::Task(d.task_id.clone())));
                }
                EventKind::SuggestionRead(r) if !suggestions.contains(r.suggestion_id.as_str()) => {
                    return Err(OplogError::DanglingReference(Reference::Suggestion(
                        r.suggestion_id.clone(),
                    )));
                }
                _ => {}
            }
        }

        let mut docs: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, ev) in events.iter().enumerate() {
            docs.entry(ev.doc_id.clone()).or_default().push(i);
        }
        Ok(Self { events, docs })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn documents(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    pub fn has_document(&self, doc_id: &str) -> bool {
        self.docs.contains_key(doc_id)
    }

    pub fn doc_events<'a>(&'a self, doc_id: &str) -> Option<impl Iterator<Item = &'a Event> + 'a> {
        self.docs
            .get(doc_id)
            .map(|idx| idx.iter().map(move |&i| &self.events[i]))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&ev.to_json_line());
            out.push('\n');
        }
        out
    }
}

/// Parses newline-delimited JSON records. Blank lines are skipped and unknown
/// top-level fields ignored.
pub fn parse_event_log(bytes: &[u8]) -> Result<EventLog, OplogError> {
    let mut events = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = i + 1;
        let text = std::str::from_utf8(raw).map_err(|e| OplogError::MalformedRecord {
            line,
            reason: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        events.push(parse_record(line, text)?);
    }
    EventLog::from_events(events)
}

fn parse_record(line: usize, text: &str) -> Result<Event, OplogError> {
    let malformed = |reason: String| OplogError::MalformedRecord { line, reason };
    let value: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(malformed("record is not a JSON object".into()));
    };
    let seq = obj
        .get("seq")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("missing or invalid `seq`".into()))?;
    let ts_ms = obj
        .get("ts_ms")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("missing or invalid `ts_ms`".into()))?;
    let doc_id = obj
        .get("doc")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing or invalid `doc`".into()))?
        .to_string();
    let kind_name = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing or invalid `kind`".into()))?;

    let payload = |obj: &Map<String, Value>| Value::Object(obj.clone());
    let kind = match kind_name {
        "text_change" => EventKind::TextChange(parse_ops(line, obj.get("ops"))?),
        "task_created" => {
            let task: TaskCreated = serde_json::from_value(payload(&obj)).map_err(|e| malformed(e.to_string()))?;
            if task.horizon.is_some() && task.task_type != TaskType::StoryPlot {
                return Err(malformed(format!(
                    "horizon is only valid for story_plot tasks, got {}",
                    task.task_type
                )));
            }
            if task.num_ideas == Some(0) {
                return Err(malformed("num_ideas must be positive".into()));
            }
            EventKind::TaskCreated(task)
        }
        "suggestion_delivered" => {
            EventKind::SuggestionDelivered(serde_json::from_value(payload(&obj)).map_err(|e| malformed(e.to_string()))?)
        }
        "suggestion_read" => {
            EventKind::SuggestionRead(serde_json::from_value(payload(&obj)).map_err(|e| malformed(e.to_string()))?)
        }
        other => {
            return Err(OplogError::UnknownKind {
                line,
                kind: other.to_string(),
            })
        }
    };
    Ok(Event {
        seq,
        ts_ms,
        doc_id,
        kind,
    })
}

fn parse_ops(line: usize, ops: Option<&Value>) -> Result<Delta, OplogError> {
    let malformed = |reason: &str| OplogError::MalformedRecord {
        line,
        reason: reason.to_string(),
    };
    let ops = ops
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("text_change without an `ops` array"))?;
    let count = |v: &Value, op: &'static str| -> Result<usize, OplogError> {
        match v.as_i64() {
            Some(n) if n < 0 => Err(OplogError::NegativeCount { line, op }),
            Some(n) => Ok(n as usize),
            None => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| malformed("op count is not an integer")),
        }
    };
    let mut components = Vec::with_capacity(ops.len());
    for op in ops {
        let op = op.as_object().ok_or_else(|| malformed("op is not an object"))?;
        // Formatting attributes ride along on retain/insert; they are dropped.
        let component = if let Some(v) = op.get("retain") {
            OpComponent::Retain(count(v, "retain")?)
        } else if let Some(v) = op.get("delete") {
            OpComponent::Delete(count(v, "delete")?)
        } else if let Some(v) = op.get("insert") {
            OpComponent::Insert(
                v.as_str()
                    .ok_or_else(|| malformed("only string inserts are supported"))?
                    .to_string(),
            )
        } else {
            return Err(malformed("op has none of retain/insert/delete"));
        };
        components.push(component);
    }
    Ok(Delta { components })
}

/// Applies `delta` to `text`; unconsumed trailing text is kept.
pub fn apply_delta(text: &str, delta: &Delta) -> Result<String, OplogError> {
    let available = text.chars().count();
    let needed = delta.span();
    if needed > available {
        return Err(OplogError::SpanOverflow { needed, available });
    }
    let mut out = String::with_capacity(text.len() + delta.inserted_len());
    let mut rest = text.chars();
    for c in &delta.components {
        match c {
            OpComponent::Retain(n) => out.extend(rest.by_ref().take(*n)),
            OpComponent::Insert(s) => out.push_str(s),
            OpComponent::Delete(n) => {
                rest.by_ref().take(*n).for_each(drop);
            }
        }
    }
    out.extend(rest);
    Ok(out)
}

/// In-place variant over a code-point buffer; cheap when edits land near the end.
pub fn apply_delta_in_place(buf: &mut Vec<char>, delta: &Delta) -> Result<(), OplogError> {
    let needed = delta.span();
    if needed > buf.len() {
        return Err(OplogError::SpanOverflow {
            needed,
            available: buf.len(),
        });
    }
    let mut cursor = 0usize;
    for c in &delta.components {
        match c {
            OpComponent::Retain(n) => cursor += n,
            OpComponent::Insert(s) => {
                let before = buf.len();
                buf.splice(cursor..cursor, s.chars());
                cursor += buf.len() - before;
            }
            OpComponent::Delete(n) => {
                buf.drain(cursor..cursor + n);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentState {
    pub doc_id: String,
    pub as_of_ms: u64,
    pub text: String,
}

/// Text of `doc_id` after every text change with `ts_ms <= t_ms`.
pub fn reconstruct_at(log: &EventLog, doc_id: &str, t_ms: u64) -> Result<DocumentState, OplogError> {
    let events = log
        .doc_events(doc_id)
        .ok_or_else(|| OplogError::UnknownDocument(doc_id.to_string()))?;
    let mut buf = Vec::new();
    for ev in events.take_while(|e| e.ts_ms <= t_ms) {
        if let Some(delta) = ev.delta() {
            apply_delta_in_place(&mut buf, delta)?;
        }
    }
    Ok(DocumentState {
        doc_id: doc_id.to_string(),
        as_of_ms: t_ms,
        text: buf.into_iter().collect(),
    })
}

/// Document text at `t_ms` and `window_s` seconds later.
pub fn snapshot_pair(log: &EventLog, doc_id: &str, t_ms: u64, window_s: u64) -> Result<(String, String), OplogError> {
    let replay = Replayer::new(log, doc_id)?;
    Ok((replay.text_at(t_ms), replay.text_at(t_ms + window_s * 1000)))
}

const CHECKPOINT_EVERY: usize = 64;

/// Replays one document with periodic checkpoints so that many
/// reconstructions of the same document stay cheap.
#[derive(Debug, Clone)]
pub struct Replayer<'a> {
    doc_id: String,
    changes: Vec<(u64, &'a Delta)>,
    /// `checkpoints[k]` is the buffer after the first `k * CHECKPOINT_EVERY` changes.
    checkpoints: Vec<Vec<char>>,
}

impl<'a> Replayer<'a> {
    /// Validates every delta of the document up front.
    pub fn new(log: &'a EventLog, doc_id: &str) -> Result<Self, OplogError> {
        let events = log
            .doc_events(doc_id)
            .ok_or_else(|| OplogError::UnknownDocument(doc_id.to_string()))?;
        let changes: Vec<(u64, &Delta)> = events.filter_map(|e| e.delta().map(|d| (e.ts_ms, d))).collect();
        let mut checkpoints = vec![Vec::new()];
        let mut buf = Vec::new();
        for (i, (_, delta)) in changes.iter().enumerate() {
            apply_delta_in_place(&mut buf, delta)?;
            if (i + 1) % CHECKPOINT_EVERY == 0 {
                checkpoints.push(buf.clone());
            }
        }
        Ok(Self {
            doc_id: doc_id.to_string(),
            changes,
            checkpoints,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn change_count(&self) -> usize {
        self.changes.len()
    }

    pub fn text_at(&self, t_ms: u64) -> String {
        let applied = self.changes.partition_point(|(ts, _)| *ts <= t_ms);
        let k = applied / CHECKPOINT_EVERY;
        let mut buf = self.checkpoints[k].clone();
        for (_, delta) in &self.changes[k * CHECKPOINT_EVERY..applied] {
            apply_delta_in_place(&mut buf, delta).expect("deltas validated on construction");
        }
        buf.into_iter().collect()
    }

    pub fn state_at(&self, t_ms: u64) -> DocumentState {
        DocumentState {
            doc_id: self.doc_id.clone(),
            as_of_ms: t_ms,
            text: self.text_at(t_ms),
        }
    }
}

/// Every document's replayer, keyed by document id.
pub fn replayers(log: &EventLog) -> Result<HashMap<String, Replayer<'_>>, OplogError> {
    log.documents()
        .map(|doc| Replayer::new(log, doc).map(|r| (doc.to_string(), r)))
        .collect()
}
