//! Replay and analysis of writing-session event logs from a crowd + AI
//! suggestion editor, plus a headless task orchestrator and a synthetic log
//! generator with planted ground truth.

pub mod analyses;
pub mod oplog;
pub mod orchestrator;
pub mod provider;
#[cfg(feature = "remote")]
pub mod remote;
pub mod report;
pub mod sessionizer;
pub mod stats;
pub mod synthgen;
pub mod textmetrics;

pub use oplog::{parse_event_log, reconstruct_at, Delta, Event, EventKind, EventLog, OpComponent, TaskType};
pub use provider::ProviderError;
pub use stats::SeededRng;
pub use textmetrics::SimilarityMetricId;
