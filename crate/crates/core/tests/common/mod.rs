#![allow(dead_code)]

use inkflux_core::oplog::{Delta, Event, EventKind, EventLog, OpComponent};
use inkflux_core::stats::SeededRng;

const ALPHABET: &[char] = &['a', 'b', 'c', ' ', '.', 'T', 'é', '字', '😀', '\n'];

pub fn random_text(rng: &mut SeededRng, max: usize) -> String {
    let n = 1 + rng.below(max as u64) as usize;
    (0..n)
        .map(|_| ALPHABET[rng.below(ALPHABET.len() as u64) as usize])
        .collect()
}

/// A random valid delta for a document of `len` code points.
pub fn random_delta(rng: &mut SeededRng, len: usize) -> Delta {
    let mut comps = Vec::new();
    let mut remaining = len;
    let steps = 1 + rng.below(4);
    for _ in 0..steps {
        match rng.below(3) {
            0 if remaining > 0 => {
                let n = 1 + rng.below(remaining as u64) as usize;
                comps.push(OpComponent::Retain(n));
                remaining -= n;
            }
            1 if remaining > 0 => {
                let n = 1 + rng.below(remaining.min(8) as u64) as usize;
                comps.push(OpComponent::Delete(n));
                remaining -= n;
            }
            _ => comps.push(OpComponent::Insert(random_text(rng, 6))),
        }
    }
    if comps.is_empty() {
        comps.push(OpComponent::Insert(random_text(rng, 6)));
    }
    Delta::new(comps)
}

/// Splices the delta into a `String` by byte offsets, one component at a time.
pub fn splice_oracle(text: &str, delta: &Delta) -> String {
    let mut s = text.to_string();
    let mut cursor = 0usize; // code points
    let byte_at = |s: &str, cp: usize| s.char_indices().nth(cp).map_or(s.len(), |(b, _)| b);
    for c in &delta.components {
        match c {
            OpComponent::Retain(n) => cursor += n,
            OpComponent::Insert(t) => {
                let b = byte_at(&s, cursor);
                s.insert_str(b, t);
                cursor += t.chars().count();
            }
            OpComponent::Delete(n) => {
                let b0 = byte_at(&s, cursor);
                let b1 = byte_at(&s, cursor + n);
                s.replace_range(b0..b1, "");
            }
        }
    }
    s
}

/// Single-document log of `n` random deltas at non-decreasing timestamps
/// (with repeats), together with the oracle text after each delta.
pub fn random_log(rng: &mut SeededRng, n: usize) -> (EventLog, Vec<(u64, String)>) {
    let mut events = Vec::with_capacity(n);
    let mut history = Vec::with_capacity(n);
    let mut text = String::new();
    let mut ts = 1_000u64;
    for seq in 0..n as u64 {
        ts += rng.below(4) * 500;
        let delta = random_delta(rng, text.chars().count());
        text = splice_oracle(&text, &delta);
        history.push((ts, text.clone()));
        events.push(Event {
            seq,
            ts_ms: ts,
            doc_id: "d".into(),
            kind: EventKind::TextChange(delta),
        });
    }
    (EventLog::from_events(events).expect("valid random log"), history)
}

/// Oracle text at `t`: the last history entry with timestamp <= t.
pub fn oracle_at(history: &[(u64, String)], t: u64) -> String {
    history
        .iter()
        .take_while(|(ts, _)| *ts <= t)
        .last()
        .map(|(_, s)| s.clone())
        .unwrap_or_default()
}
