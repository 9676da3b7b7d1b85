mod common;

use inkflux_core::oplog::{
    apply_delta, parse_event_log, reconstruct_at, Event, EventKind, EventLog, OplogError, Reference, Replayer,
    SuggestionDelivered, SuggestionRead, TaskCreated, TaskType,
};
use inkflux_core::stats::SeededRng;
use proptest::prelude::*;

use common::{oracle_at, random_delta, random_log, random_text, splice_oracle};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn apply_matches_splice(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let text = random_text(&mut rng, 40);
        let delta = random_delta(&mut rng, text.chars().count());
        prop_assert_eq!(apply_delta(&text, &delta).unwrap(), splice_oracle(&text, &delta));
    }

    #[test]
    fn length_bookkeeping(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let text = random_text(&mut rng, 40);
        let delta = random_delta(&mut rng, text.chars().count());
        let out = apply_delta(&text, &delta).unwrap();
        prop_assert_eq!(
            out.chars().count(),
            text.chars().count() + delta.inserted_len() - delta.deleted_len()
        );
    }

    #[test]
    fn fold_splits_at_any_point(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = SeededRng::new(seed);
        let (log, history) = random_log(&mut rng, n);
        let t1 = history[rng.below(n as u64) as usize].0;
        let t2 = t1 + rng.below(3_000);
        let mid = reconstruct_at(&log, "d", t1).unwrap().text;
        let mut resumed = mid;
        for ev in log.events().iter().filter(|e| e.ts_ms > t1 && e.ts_ms <= t2) {
            resumed = apply_delta(&resumed, ev.delta().unwrap()).unwrap();
        }
        prop_assert_eq!(resumed, reconstruct_at(&log, "d", t2).unwrap().text);
    }

    #[test]
    fn replayer_agrees_with_fold(seed in any::<u64>(), n in 1usize..300) {
        let mut rng = SeededRng::new(seed);
        let (log, history) = random_log(&mut rng, n);
        let replay = Replayer::new(&log, "d").unwrap();
        for _ in 0..10 {
            let t = rng.below(history.last().unwrap().0 + 2_000);
            prop_assert_eq!(replay.text_at(t), oracle_at(&history, t));
        }
    }

    #[test]
    fn serialization_round_trip(seed in any::<u64>(), n in 0usize..40) {
        let mut rng = SeededRng::new(seed);
        let (log, _) = random_log(&mut rng, n);
        let jsonl = log.to_jsonl();
        let parsed = parse_event_log(jsonl.as_bytes()).unwrap();
        prop_assert_eq!(&parsed, &log);
        prop_assert_eq!(parsed.to_jsonl(), jsonl);
    }
}

fn lifecycle_events() -> Vec<Event> {
    let ev = |seq, ts_ms, kind| Event {
        seq,
        ts_ms,
        doc_id: "d".into(),
        kind,
    };
    vec![
        ev(
            0,
            0,
            EventKind::TaskCreated(TaskCreated {
                task_id: "t1".into(),
                task_type: TaskType::Crowd,
                snippet_start: 0,
                snippet_len: 3,
                instruction: None,
                num_ideas: Some(2),
                horizon: None,
            }),
        ),
        ev(
            1,
            10,
            EventKind::SuggestionDelivered(SuggestionDelivered {
                task_id: "t1".into(),
                suggestion_id: "s1".into(),
                tab_index: 0,
                text: "Idea.".into(),
            }),
        ),
        ev(
            2,
            20,
            EventKind::SuggestionRead(SuggestionRead {
                suggestion_id: "s1".into(),
            }),
        ),
    ]
}

#[test]
fn removing_a_referenced_record_is_rejected() {
    let events = lifecycle_events();
    assert!(EventLog::from_events(events.clone()).is_ok());

    let without_delivery: Vec<Event> = events.iter().filter(|e| e.seq != 1).cloned().collect();
    assert_eq!(
        EventLog::from_events(without_delivery),
        Err(OplogError::DanglingReference(Reference::Suggestion("s1".into())))
    );
    let without_task: Vec<Event> = events.iter().filter(|e| e.seq != 0).cloned().collect();
    assert_eq!(
        EventLog::from_events(without_task),
        Err(OplogError::DanglingReference(Reference::Task("t1".into())))
    );

    let jsonl = EventLog::from_events(events).unwrap().to_jsonl();
    let dropped: String = jsonl
        .lines()
        .filter(|l| !l.contains("suggestion_delivered"))
        .map(|l| format!("{l}\n"))
        .collect();
    assert!(matches!(
        parse_event_log(dropped.as_bytes()),
        Err(OplogError::DanglingReference(_))
    ));
}

#[test]
fn parsing_is_deterministic_under_record_order() {
    let jsonl = EventLog::from_events(lifecycle_events()).unwrap().to_jsonl();
    let mut lines: Vec<&str> = jsonl.lines().collect();
    lines.reverse();
    let shuffled = lines.join("\n");
    assert_eq!(
        parse_event_log(shuffled.as_bytes()).unwrap(),
        parse_event_log(jsonl.as_bytes()).unwrap()
    );
}
