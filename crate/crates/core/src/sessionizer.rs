//! Working-session segmentation by inactivity threshold, threshold sweeps and
//! knee selection on the threshold -> session-count curve.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::oplog::{EventKind, EventLog};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("timestamps are not sorted ascending")]
    Unsorted,
    #[error("thresholds must be strictly increasing")]
    UnorderedThresholds,
    #[error("knee selection needs at least 3 sweep points, got {0}")]
    TooFewPoints(usize),
}

/// Document id used for sessions computed over all documents at once.
pub const POOLED_DOC: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorkingSession {
    pub doc_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub event_count: usize,
}

impl WorkingSession {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ms() as f64 / 1000.0
    }

    pub fn contains(&self, ts_ms: u64) -> bool {
        (self.start_ms..=self.end_ms).contains(&ts_ms)
    }
}

fn check_inputs(timestamps_ms: &[u64], threshold_s: f64) -> Result<(), SessionError> {
    if !(threshold_s > 0.0) {
        return Err(SessionError::InvalidThreshold(threshold_s));
    }
    if timestamps_ms.windows(2).any(|w| w[1] < w[0]) {
        return Err(SessionError::Unsorted);
    }
    Ok(())
}

fn splits(gap_ms: u64, threshold_s: f64) -> bool {
    gap_ms as f64 >= threshold_s * 1000.0
}

/// Greedy left-to-right split wherever a gap is at least the threshold.
pub fn segment_sessions(
    doc_id: &str,
    timestamps_ms: &[u64],
    threshold_s: f64,
) -> Result<Vec<WorkingSession>, SessionError> {
    check_inputs(timestamps_ms, threshold_s)?;
    let mut sessions: Vec<WorkingSession> = Vec::new();
    for &ts in timestamps_ms {
        match sessions.last_mut() {
            Some(s) if !splits(ts - s.end_ms, threshold_s) => {
                s.end_ms = ts;
                s.event_count += 1;
            }
            _ => sessions.push(WorkingSession {
                doc_id: doc_id.to_string(),
                start_ms: ts,
                end_ms: ts,
                event_count: 1,
            }),
        }
    }
    Ok(sessions)
}

pub fn session_count(timestamps_ms: &[u64], threshold_s: f64) -> Result<usize, SessionError> {
    check_inputs(timestamps_ms, threshold_s)?;
    if timestamps_ms.is_empty() {
        return Ok(0);
    }
    Ok(1 + timestamps_ms
        .windows(2)
        .filter(|w| splits(w[1] - w[0], threshold_s))
        .count())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub threshold_s: f64,
    pub session_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ThresholdSweep {
    pub points: Vec<SweepPoint>,
}

impl ThresholdSweep {
    /// Adds counts of another sweep over the same thresholds.
    fn accumulate(&mut self, other: &ThresholdSweep) {
        if self.points.is_empty() {
            self.points = other.points.clone();
            return;
        }
        for (a, b) in self.points.iter_mut().zip(&other.points) {
            debug_assert_eq!(a.threshold_s, b.threshold_s);
            a.session_count += b.session_count;
        }
    }
}

/// 60 s to 1200 s in 60 s steps.
pub fn default_thresholds() -> Vec<f64> {
    (1..=20).map(|m| m as f64 * 60.0).collect()
}

pub fn threshold_sweep(timestamps_ms: &[u64], thresholds_s: &[f64]) -> Result<ThresholdSweep, SessionError> {
    if thresholds_s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SessionError::UnorderedThresholds);
    }
    let points = thresholds_s
        .iter()
        .map(|&t| {
            session_count(timestamps_ms, t).map(|session_count| SweepPoint {
                threshold_s: t,
                session_count,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(ThresholdSweep { points })
}

/// Threshold whose point lies farthest from the chord joining the first and
/// last sweep points, with both axes min-max normalized to `[0, 1]`. Ties go
/// to the smaller threshold.
pub fn knee_threshold(sweep: &ThresholdSweep) -> Result<f64, SessionError> {
    let pts = &sweep.points;
    if pts.len() < 3 {
        return Err(SessionError::TooFewPoints(pts.len()));
    }
    let norm = |values: Vec<f64>| -> Vec<f64> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        values
            .into_iter()
            .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
            .collect()
    };
    let xs = norm(pts.iter().map(|p| p.threshold_s).collect());
    let ys = norm(pts.iter().map(|p| p.session_count as f64).collect());
    let n = pts.len() - 1;
    let (dx, dy) = (xs[n] - xs[0], ys[n] - ys[0]);
    let chord = (dx * dx + dy * dy).sqrt();
    let distance = |i: usize| {
        let cross = (dx * (ys[i] - ys[0]) - dy * (xs[i] - xs[0])).abs();
        if chord > 0.0 {
            cross / chord
        } else {
            0.0
        }
    };
    const TIE: f64 = 1e-12;
    let mut best = 0;
    let mut best_d = distance(0);
    for i in 1..pts.len() {
        let d = distance(i);
        if d > best_d + TIE {
            best = i;
            best_d = d;
        }
    }
    Ok(pts[best].threshold_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SessionMode {
    /// Segment each document separately; sweep counts are summed.
    #[default]
    PerDocument,
    /// Merge every document's activity into one stream.
    Pooled,
}

/// Activity timestamps (text changes and suggestion reads) per document, sorted.
pub fn activity_timestamps(log: &EventLog) -> BTreeMap<String, Vec<u64>> {
    let mut out: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for ev in log.events() {
        if matches!(ev.kind, EventKind::TextChange(_) | EventKind::SuggestionRead(_)) {
            out.entry(ev.doc_id.clone()).or_default().push(ev.ts_ms);
        }
    }
    out
}

fn streams(log: &EventLog, mode: SessionMode) -> BTreeMap<String, Vec<u64>> {
    let per_doc = activity_timestamps(log);
    match mode {
        SessionMode::PerDocument => per_doc,
        SessionMode::Pooled => {
            let mut all: Vec<u64> = per_doc.into_values().flatten().collect();
            all.sort_unstable();
            BTreeMap::from([(POOLED_DOC.to_string(), all)])
        }
    }
}

pub fn log_sessions(log: &EventLog, threshold_s: f64, mode: SessionMode) -> Result<Vec<WorkingSession>, SessionError> {
    let mut out = Vec::new();
    for (doc, ts) in streams(log, mode) {
        out.extend(segment_sessions(&doc, &ts, threshold_s)?);
    }
    Ok(out)
}

pub fn log_sweep(log: &EventLog, thresholds_s: &[f64], mode: SessionMode) -> Result<ThresholdSweep, SessionError> {
    let mut total = ThresholdSweep::default();
    for ts in streams(log, mode).values() {
        total.accumulate(&threshold_sweep(ts, thresholds_s)?);
    }
    if total.points.is_empty() {
        total = threshold_sweep(&[], thresholds_s)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secs(xs: &[u64]) -> Vec<u64> {
        xs.iter().map(|s| s * 1000).collect()
    }

    #[test]
    fn two_sessions() {
        let s = segment_sessions("d", &secs(&[0, 10, 20, 1000, 1010]), 240.0).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].start_ms, s[0].end_ms, s[0].event_count), (0, 20_000, 3));
        assert_eq!(
            (s[1].start_ms, s[1].end_ms, s[1].event_count),
            (1_000_000, 1_010_000, 2)
        );
    }

    #[test]
    fn single_and_empty() {
        let s = segment_sessions("d", &[5], 1.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].duration_s(), 0.0);
        assert!(segment_sessions("d", &[], 1.0).unwrap().is_empty());
    }

    #[test]
    fn gap_equal_to_threshold_splits() {
        assert_eq!(segment_sessions("d", &secs(&[0, 240]), 240.0).unwrap().len(), 2);
        assert_eq!(segment_sessions("d", &[0, 239_999], 240.0).unwrap().len(), 1);
    }

    #[test]
    fn input_validation() {
        assert_eq!(
            segment_sessions("d", &[1], 0.0),
            Err(SessionError::InvalidThreshold(0.0))
        );
        assert_eq!(segment_sessions("d", &[2, 1], 1.0), Err(SessionError::Unsorted));
        assert_eq!(
            threshold_sweep(&[1], &[5.0, 5.0]),
            Err(SessionError::UnorderedThresholds)
        );
    }

    #[test]
    fn sweep_example() {
        // gaps 10, 10, 980, 10
        let ts = secs(&[0, 10, 20, 1000, 1010]);
        let sweep = threshold_sweep(&ts, &[5.0, 500.0, 2000.0]).unwrap();
        let counts: Vec<usize> = sweep.points.iter().map(|p| p.session_count).collect();
        assert_eq!(counts, vec![5, 2, 1]);
        let same = threshold_sweep(&[7, 7, 7], &[1.0, 2.0]).unwrap();
        assert!(same.points.iter().all(|p| p.session_count == 1));
    }

    fn sweep_of(points: &[(f64, usize)]) -> ThresholdSweep {
        ThresholdSweep {
            points: points
                .iter()
                .map(|&(threshold_s, session_count)| SweepPoint {
                    threshold_s,
                    session_count,
                })
                .collect(),
        }
    }

    #[test]
    fn knee_linear_tie_goes_to_first() {
        let sweep = sweep_of(&[(1.0, 40), (2.0, 30), (3.0, 20), (4.0, 10)]);
        assert_eq!(knee_threshold(&sweep).unwrap(), 1.0);
        let flat = sweep_of(&[(1.0, 3), (2.0, 3), (3.0, 3)]);
        assert_eq!(knee_threshold(&flat).unwrap(), 1.0);
        assert_eq!(
            knee_threshold(&sweep_of(&[(1.0, 1), (2.0, 1)])),
            Err(SessionError::TooFewPoints(2))
        );
    }

    #[test]
    fn knee_reference_curve() {
        let pts = [
            (60.0, 400),
            (120.0, 180),
            (180.0, 90),
            (240.0, 60),
            (300.0, 55),
            (360.0, 52),
            (420.0, 50),
        ];
        // Brute-force oracle: normalized perpendicular distance to the chord.
        let (x0, x1) = (60.0, 420.0);
        let (y0, y1) = (50.0, 400.0);
        let nx = |x: f64| (x - x0) / (x1 - x0);
        let ny = |y: f64| (y - y0) / (y1 - y0);
        let (ax, ay, bx, by) = (nx(60.0), ny(400.0), nx(420.0), ny(50.0));
        let mut best = (f64::MIN, 0.0);
        for &(x, c) in &pts {
            let (px, py) = (nx(x), ny(c as f64));
            let d =
                ((bx - ax) * (ay - py) - (ax - px) * (by - ay)).abs() / ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
            if d > best.0 {
                best = (d, x);
            }
        }
        assert_eq!(best.1, 180.0);
        assert_eq!(knee_threshold(&sweep_of(&pts)).unwrap(), best.1);
    }

    #[test]
    fn default_grid() {
        let g = default_thresholds();
        assert_eq!(g.len(), 20);
        assert_eq!((g[0], g[19]), (60.0, 1200.0));
    }
}
