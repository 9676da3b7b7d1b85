//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints a PASS/FAIL line; the process exits non-zero if any fail.
//!
//! Set `INKFLUX_BLESS=1` to rewrite the golden CSVs under `tests/golden/`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use inkflux_cli::{run_with, sessions_for, EXIT_OK};
use inkflux_core::analyses::{
    baseline_influence, influence_samples, latency_report, progress_samples, usage_trend, BaselineConfig,
};
use inkflux_core::oplog::{reconstruct_at, Event, EventKind, EventLog, TaskCreated, TaskType};
use inkflux_core::orchestrator::{render_plot_prompt, simulate_crowd_latency, DelayModel, IntRange, LognormalParams};
use inkflux_core::sessionizer::{default_thresholds, knee_threshold, log_sweep, SessionMode};
use inkflux_core::stats::{gaussian_kde, ks_critical_value, ks_statistic, quantiles, SeededRng};
use inkflux_core::synthgen::{generate_log, simulate, Adoption, PlanItem, SimulationConfig, SynthConfig};
use inkflux_core::textmetrics::{Providers, SimilarityMetricId};

use common::{random_log, splice_oracle};

const CANONICAL: &str = include_str!("fixtures/canonical_sim.json");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("reconstruction oracle", c1_reconstruction),
        ("session knee recovery", c2_knee),
        ("adoption detection", c3_adoption),
        ("null indistinguishability", c4_null),
        ("progress fidelity", c5_progress),
        ("statistical kernels", c6_kernels),
        ("latency closure", c7_latency),
        ("prompt byte-exactness", c8_prompts),
        ("end-to-end determinism", c9_end_to_end),
        ("usage-trend arithmetic", c10_usage),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = run();
        println!(
            "criterion {:>2} {:<26} {}  {} ({:.1}s)",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn c1_reconstruction() -> Outcome {
    let mut rng = SeededRng::new(2024);
    let mut mismatches = 0;
    let mut checks = 0;
    let mut elapsed = 0.0;
    for _ in 0..1000 {
        let n = 1 + rng.below(500) as usize;
        let (log, history) = random_log(&mut rng, n);
        let end = history.last().unwrap().0 + 1_000;
        let probes: Vec<u64> = (0..20).map(|_| rng.below(end)).collect();
        let started = Instant::now();
        let got: Vec<String> = probes
            .iter()
            .map(|&t| reconstruct_at(&log, "d", t).unwrap().text)
            .collect();
        elapsed += started.elapsed().as_secs_f64();
        for (t, text) in probes.iter().zip(got) {
            // fold the oracle from scratch rather than trusting stored history
            let mut expect = String::new();
            for ev in log.events().iter().take_while(|e| e.ts_ms <= *t) {
                expect = splice_oracle(&expect, ev.delta().unwrap());
            }
            checks += 1;
            mismatches += usize::from(text != expect);
        }
    }
    outcome(
        mismatches == 0 && elapsed < 10.0,
        format!("{checks} probes, {mismatches} mismatches, reconstruct time {elapsed:.2}s"),
    )
}

fn c2_knee() -> Outcome {
    let mut hits = 0;
    for seed in 0..100 {
        let cfg = SynthConfig {
            seed,
            n_sessions: 20,
            words_per_session: IntRange::new(5, 15),
            within_gap_s: DelayModel::Exp {
                offset: 0.0,
                mean: 20.0,
                cap: Some(1799.0),
            },
            ..SynthConfig::default()
        };
        let (log, truth) = generate_log(&cfg).unwrap();
        let ts: Vec<u64> = log.events().iter().map(|e| e.ts_ms).collect();
        let gaps: Vec<u64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
        let boundaries: Vec<u64> = truth.sessions.iter().map(|s| s.start_ms).collect();
        let (mut max_within, mut min_between) = (0u64, u64::MAX);
        for (w, g) in ts.windows(2).zip(&gaps) {
            if boundaries.contains(&w[1]) {
                min_between = min_between.min(*g);
            } else {
                max_within = max_within.max(*g);
            }
        }
        let sweep = log_sweep(&log, &default_thresholds(), SessionMode::PerDocument).unwrap();
        let knee = knee_threshold(&sweep).unwrap();
        let (lo, hi) = (max_within as f64 / 1000.0 - 60.0, min_between as f64 / 1000.0 + 60.0);
        hits += usize::from(lo <= knee && knee <= hi);
    }
    outcome(hits >= 95, format!("{hits}/100 worlds within the separating band"))
}

fn adoption_world(seed: u64, adoption: Adoption) -> SynthConfig {
    let read = |ty| PlanItem {
        read_prob: Some(1.0),
        ..PlanItem::new(ty, 2)
    };
    SynthConfig {
        seed,
        docs: 2,
        n_sessions: 6,
        words_per_session: IntRange::new(40, 90),
        suggestion_plan: vec![
            PlanItem {
                read_prob: Some(1.0),
                adoption,
                ..PlanItem::new(TaskType::Gpt3Continuation, 1)
            },
            read(TaskType::StoryPlot),
            read(TaskType::Gpt3Plot),
            read(TaskType::Gpt3Continuation),
        ],
        ..SynthConfig::default()
    }
}

fn c3_adoption() -> Outcome {
    let providers = Providers::default();
    let (mut detected, mut worlds, mut skipped) = (0, 0, 0);
    let mut seed = 0;
    while worlds < 100 {
        let (log, truth) = generate_log(&adoption_world(seed, Adoption::Verbatim)).unwrap();
        seed += 1;
        // a read that lands after the last session leaves nothing to adopt
        if truth.adoptions.len() != 1 {
            skipped += 1;
            continue;
        }
        worlds += 1;
        let report = influence_samples(&log, 300, SimilarityMetricId::Edit, &providers).unwrap();
        let ok = report
            .samples
            .iter()
            .any(|s| s.record.suggestion_id == truth.adoptions[0].suggestion_id && s.score == 1.0);
        detected += usize::from(ok);
    }
    let mut worst: f64 = 0.0;
    let mut scored = 0;
    for seed in 0..100 {
        let (log, _) = generate_log(&adoption_world(seed, Adoption::None)).unwrap();
        for s in influence_samples(&log, 300, SimilarityMetricId::Edit, &providers)
            .unwrap()
            .samples
        {
            worst = worst.max(s.score);
            scored += 1;
        }
    }
    outcome(
        detected == 100 && worst <= 0.35,
        format!(
            "verbatim detected {detected}/{worlds} ({skipped} seeds planted no adoption); null max edit score {worst:.3} over {scored} reads"
        ),
    )
}

fn null_world(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        docs: 4,
        n_sessions: 8,
        words_per_session: IntRange::new(60, 160),
        suggestion_plan: TaskType::ALL.iter().map(|&t| PlanItem::new(t, 15)).collect(),
        ..SynthConfig::default()
    }
}

fn c4_null() -> Outcome {
    let providers = Providers::default();
    let mut below = 0;
    let mut sizes = (usize::MAX, 0);
    for seed in 0..100 {
        let (log, _) = generate_log(&null_world(seed)).unwrap();
        let sessions = sessions_for(&log, None).unwrap();
        let treatment: Vec<f64> = influence_samples(&log, 300, SimilarityMetricId::Edit, &providers)
            .unwrap()
            .samples
            .iter()
            .map(|s| s.score)
            .collect();
        let cfg = BaselineConfig {
            n_runs: 1000,
            window_s: 300,
            seed,
        };
        let baseline = baseline_influence(&log, &cfg, &sessions, SimilarityMetricId::Edit, &providers).unwrap();
        if treatment.is_empty() || baseline.scores.is_empty() {
            continue;
        }
        sizes = (sizes.0.min(treatment.len()), sizes.1.max(treatment.len()));
        let d = ks_statistic(&treatment, &baseline.scores).unwrap();
        below += usize::from(d < ks_critical_value(0.01, treatment.len(), baseline.scores.len()));
    }
    outcome(
        below >= 90,
        format!(
            "{below}/100 worlds below the 0.01 critical value ({}..{} treatment samples)",
            sizes.0, sizes.1
        ),
    )
}

fn c5_progress() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for rate in [10u64, 20, 40] {
        let cfg = SynthConfig {
            seed: rate,
            docs: 2,
            n_sessions: 4,
            words_per_session: IntRange::new(rate as usize * 20, rate as usize * 25),
            typing_words_per_min: Some(rate as f64),
            suggestion_plan: vec![PlanItem {
                latency: Some(DelayModel::Fixed(5.0)),
                read_delay: Some(DelayModel::Fixed(5.0)),
                read_prob: Some(1.0),
                ..PlanItem::new(TaskType::Gpt3Continuation, 12)
            }],
            ..SynthConfig::default()
        };
        let (log, truth) = generate_log(&cfg).unwrap();
        let samples = progress_samples(&log, 300).unwrap();
        let inside: Vec<i64> = samples
            .iter()
            .filter(|s| {
                truth.sessions.iter().any(|p| {
                    p.doc_id == s.record.doc_id
                        && p.start_ms <= s.record.read_ts_ms
                        && s.record.read_ts_ms + 300_000 <= p.end_ms
                })
            })
            .map(|s| s.word_delta)
            .collect();
        let target = 5 * rate as i64;
        let ok = !inside.is_empty() && inside.iter().all(|d| (d - target).abs() <= 2);
        pass &= ok;
        let (lo, hi) = (
            inside.iter().min().copied().unwrap_or(0),
            inside.iter().max().copied().unwrap_or(0),
        );
        details.push(format!("r={rate}: {} windows in [{lo},{hi}] vs {target}", inside.len()));
    }
    outcome(pass, details.join("; "))
}

fn oracle_quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let i = pos as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    let f = pos - i as f64;
    (1.0 - f) * v[i] + f * v[i + 1]
}

fn c6_kernels() -> Outcome {
    let mut rng = SeededRng::new(6);
    let mut worst_q: f64 = 0.0;
    let mut worst_area: f64 = 0.0;
    let mut worst_probe: f64 = 0.0;
    for set in 0..1000 {
        let n = 2 + rng.below(300) as usize;
        let xs: Vec<f64> = (0..n).map(|_| rng.uniform_range(-100.0, 100.0)).collect();
        let qs: Vec<f64> = (0..7)
            .map(|_| rng.next_uniform())
            .chain([0.0, 0.25, 0.5, 0.75, 1.0])
            .collect();
        for (q, got) in qs.iter().zip(quantiles(&xs, &qs).unwrap()) {
            worst_q = worst_q.max((got - oracle_quantile(&xs, *q)).abs());
        }
        let clip = (set % 2 == 0).then_some((-50.0, 50.0));
        let kde = gaussian_kde(&xs, None, 512, clip).unwrap();
        worst_area = worst_area.max((kde.integral() - 1.0).abs());
        let data: Vec<f64> = match clip {
            Some((lo, hi)) => xs.iter().map(|x| x.clamp(lo, hi)).collect(),
            None => xs.clone(),
        };
        let h = kde.bandwidth;
        for _ in 0..5 {
            let i = rng.below(kde.grid.len() as u64) as usize;
            let x = kde.grid[i];
            let direct = data.iter().map(|xi| (-0.5 * ((x - xi) / h).powi(2)).exp()).sum::<f64>()
                / (data.len() as f64 * h * (2.0 * PI).sqrt());
            worst_probe = worst_probe.max((kde.density[i] - direct).abs());
        }
    }
    outcome(
        worst_q <= 1e-12 && worst_area <= 1e-3 && worst_probe <= 1e-12,
        format!("max quantile err {worst_q:.1e}, max |area-1| {worst_area:.1e}, max probe err {worst_probe:.1e}"),
    )
}

fn c7_latency() -> Outcome {
    let config: SimulationConfig = serde_json::from_str(CANONICAL).unwrap();
    let (log, truth) = simulate(&config).unwrap();
    let report = latency_report(&log);
    let mut planted: BTreeMap<TaskType, Vec<f64>> = BTreeMap::new();
    for d in &truth.deliveries {
        if let Some(first) = d.delivered_ts_ms.iter().min() {
            planted
                .entry(d.task_type)
                .or_default()
                .push((first - d.created_ts_ms) as f64 / 1000.0);
        }
    }
    let mut mismatched = Vec::new();
    let mut tasks = 0;
    for ty in TaskType::ALL {
        let got = report.get(ty).system_s.clone();
        let want = planted.remove(&ty).unwrap_or_default();
        tasks += want.len();
        if got != want {
            mismatched.push(ty.to_string());
        }
    }
    let root = SeededRng::new(3449);
    let draws: Vec<f64> = (0..10_000)
        .map(|i| simulate_crowd_latency(&mut root.split(i), LognormalParams::default()))
        .collect();
    let median = quantiles(&draws, &[0.5]).unwrap()[0];
    outcome(
        mismatched.is_empty() && (2500.0..=4500.0).contains(&median),
        format!("{tasks} tasks, mismatched types {mismatched:?}; crowd median {median:.0}s"),
    )
}

fn c8_prompts() -> Outcome {
    let fixtures = [
        (
            "The ship sailed at dawn",
            "make the captain a traitor",
            "Given the previous story: The ship sailed at dawn.\nFollow the instruction: make the captain a traitor to describe the follow-up story arc using 50 words.",
        ),
        (
            "  She opened the door.\nNobody was there! ",
            "keep it short, “quiet”",
            "Given the previous story:   She opened the door.\nNobody was there! .\nFollow the instruction: keep it short, “quiet” to describe the follow-up story arc using 50 words.",
        ),
        (
            "Rain.",
            "",
            "Given the previous story: Rain..\nFollow the instruction:  to describe the follow-up story arc using 50 words.",
        ),
    ];
    let matched = fixtures
        .iter()
        .filter(|(s, i, want)| render_plot_prompt(s, i).ok().as_deref().map(str::as_bytes) == Some(want.as_bytes()))
        .count();
    outcome(
        matched == fixtures.len(),
        format!("{matched}/{} templates byte-identical", fixtures.len()),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let argv: Vec<String> = std::iter::once("inkflux")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    match run_with(&argv, &mut out, &mut err) {
        EXIT_OK => Ok(()),
        code => Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err))),
    }
}

fn pipeline(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/canonical_sim.json");
    let log = dir.join("canonical.jsonl");
    let (log_s, dir_s) = (log.to_str().unwrap(), dir.to_str().unwrap());
    run_cli(&["simulate", fixture.to_str().unwrap(), "--out", log_s, "--seed", "7"])?;
    run_cli(&["rq1", log_s, "--out", dir_s])?;
    run_cli(&["rq2", log_s, "--seed", "7", "--out", dir_s])?;
    run_cli(&["rq3", log_s, "--seed", "7", "--out", dir_s])?;
    let mut bundle = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        bundle.insert(name, fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(bundle)
}

fn c9_end_to_end() -> Outcome {
    for var in ["INKFLUX_EMBED_ENDPOINT", "INKFLUX_PARAPHRASE_ENDPOINT"] {
        std::env::remove_var(var);
    }
    let started = Instant::now();
    let runs: Result<Vec<_>, String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            pipeline(dir.path())
        })
        .collect();
    let elapsed = started.elapsed().as_secs_f64();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let identical = runs[0] == runs[1];
    let golden_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let csvs: BTreeMap<&String, &Vec<u8>> = runs[0].iter().filter(|(n, _)| n.ends_with(".csv")).collect();
    if std::env::var_os("INKFLUX_BLESS").is_some() {
        fs::create_dir_all(&golden_dir).unwrap();
        for (name, bytes) in &csvs {
            fs::write(golden_dir.join(name), bytes).unwrap();
        }
    }
    let mut golden_diff = Vec::new();
    for (name, bytes) in &csvs {
        if fs::read(golden_dir.join(name)).ok().as_ref() != Some(*bytes) {
            golden_diff.push(name.as_str());
        }
    }
    let committed = fs::read_dir(&golden_dir).map(|d| d.count()).unwrap_or(0);
    outcome(
        identical && golden_diff.is_empty() && committed == csvs.len() && elapsed < 60.0,
        format!(
            "{} files per run, identical={identical}, {} CSVs vs {committed} goldens, differing {golden_diff:?}, {elapsed:.1}s for two runs",
            runs[0].len(),
            csvs.len()
        ),
    )
}

fn c10_usage() -> Outcome {
    use TaskType::*;
    let order = [
        Crowd,
        Crowd,
        StoryPlot,
        Gpt3Continuation,
        Gpt3Continuation,
        Gpt3Continuation,
        Gpt3Plot,
        Gpt3Continuation,
    ];
    let events: Vec<Event> = order
        .iter()
        .enumerate()
        .map(|(i, &ty)| Event {
            seq: i as u64,
            ts_ms: 1_000 * i as u64,
            doc_id: "d".into(),
            kind: EventKind::TaskCreated(TaskCreated {
                task_id: format!("t{i}"),
                task_type: ty,
                snippet_start: 0,
                snippet_len: 1,
                instruction: None,
                num_ideas: (ty == Crowd).then_some(3),
                horizon: None,
            }),
        })
        .collect();
    let log = EventLog::from_events(events).unwrap();
    let table: Vec<BTreeMap<TaskType, f64>> = usage_trend(&log, 4)
        .unwrap()
        .phases
        .iter()
        .map(|p| p.proportions())
        .collect();
    let expected: Vec<BTreeMap<TaskType, f64>> = vec![
        [(Crowd, 1.0)].into(),
        [(StoryPlot, 0.5), (Gpt3Continuation, 0.5)].into(),
        [(Gpt3Continuation, 1.0)].into(),
        [(Gpt3Plot, 0.5), (Gpt3Continuation, 0.5)].into(),
    ];

    let config: SimulationConfig = serde_json::from_str(CANONICAL).unwrap();
    let known: BTreeMap<TaskType, usize> =
        [(Crowd, 37), (StoryPlot, 68), (Gpt3Plot, 39), (Gpt3Continuation, 74)].into();
    let (canonical, _) = simulate(&config).unwrap();
    let totals = usage_trend(&canonical, 4).unwrap().totals();
    outcome(
        table == expected && totals == known,
        format!(
            "8-request table exact={}, canonical totals {totals:?}",
            table == expected
        ),
    )
}
