//! Browser bindings: KDE explorer, session threshold sweep and suggestion
//! influence scoring. Every export takes plain strings and numbers and
//! returns a JSON document.

use inkflux_core::analyses::newly_edited;
use inkflux_core::report::{emit_kde_svg, SvgStyle};
use inkflux_core::sessionizer::{knee_threshold, segment_sessions, threshold_sweep};
use inkflux_core::stats::gaussian_kde;
use inkflux_core::textmetrics::{max_pairwise_influence, split_sentences, Providers, SimilarityMetricId};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

/// Density curve for `samples` (comma or whitespace separated). A
/// non-positive bandwidth selects Silverman's rule; clipping applies when
/// `clip_lo < clip_hi`.
pub fn kde_json(samples: &str, bandwidth: f64, clip_lo: f64, clip_hi: f64) -> Result<Value, String> {
    let xs = numbers(samples)?;
    let bw = (bandwidth > 0.0).then_some(bandwidth);
    let clip = (clip_lo < clip_hi).then_some((clip_lo, clip_hi));
    let curve = gaussian_kde(&xs, bw, 256, clip).map_err(|e| e.to_string())?;
    let style = SvgStyle {
        title: format!("KDE, bandwidth {:.4}", curve.bandwidth),
        x_label: "value".into(),
        y_label: "density".into(),
    };
    let svg = emit_kde_svg(&[("samples".to_string(), curve.clone())], &style).map_err(|e| e.to_string())?;
    Ok(json!({
        "bandwidth": curve.bandwidth,
        "area": curve.integral(),
        "grid": curve.grid,
        "density": curve.density,
        "svg": svg,
    }))
}

/// Sweep over thresholds `lo..=hi` by `step` seconds for activity
/// timestamps given in seconds, with the knee and the sessions it yields.
pub fn sessions_json(timestamps_s: &str, lo: f64, hi: f64, step: f64) -> Result<Value, String> {
    if !(lo > 0.0 && step > 0.0 && hi >= lo) {
        return Err("need 0 < lo <= hi and step > 0".into());
    }
    let mut ts: Vec<u64> = numbers(timestamps_s)?
        .into_iter()
        .map(|t| (t * 1000.0).round().max(0.0) as u64)
        .collect();
    ts.sort_unstable();
    let thresholds: Vec<f64> = (0..)
        .map(|i| lo + step * i as f64)
        .take_while(|t| *t <= hi + 1e-9)
        .collect();
    let sweep = threshold_sweep(&ts, &thresholds).map_err(|e| e.to_string())?;
    let knee = knee_threshold(&sweep).map_err(|e| e.to_string())?;
    let sessions = segment_sessions("demo", &ts, knee).map_err(|e| e.to_string())?;
    Ok(json!({
        "points": sweep.points.iter().map(|p| json!([p.threshold_s, p.session_count])).collect::<Vec<_>>(),
        "knee_s": knee,
        "sessions": sessions
            .iter()
            .map(|s| json!({"start_s": s.start_ms as f64 / 1000.0, "end_s": s.end_ms as f64 / 1000.0, "events": s.event_count}))
            .collect::<Vec<_>>(),
    }))
}

/// Influence of `suggestion` on the edit from `before` to `after` under the
/// three offline metrics.
pub fn influence_json(suggestion: &str, before: &str, after: &str) -> Result<Value, String> {
    let new = newly_edited(before, after);
    let new_texts: Vec<&str> = new.iter().map(|s| s.text.as_str()).collect();
    let sug = split_sentences(suggestion);
    let sug_texts: Vec<&str> = sug.iter().map(|s| s.text.as_str()).collect();
    let providers = Providers::default();
    let mut scores = serde_json::Map::new();
    for metric in [
        SimilarityMetricId::Edit,
        SimilarityMetricId::Semantic,
        SimilarityMetricId::Paraphrase,
    ] {
        let score = max_pairwise_influence(metric, &sug_texts, &new_texts, &providers).map_err(|e| e.to_string())?;
        scores.insert(metric.to_string(), json!(score));
    }
    Ok(json!({ "newly_edited": new_texts, "scores": scores }))
}

fn to_js(result: Result<Value, String>) -> Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn kde(samples: &str, bandwidth: f64, clip_lo: f64, clip_hi: f64) -> Result<String, JsError> {
    to_js(kde_json(samples, bandwidth, clip_lo, clip_hi))
}

#[wasm_bindgen]
pub fn sessions(timestamps_s: &str, lo: f64, hi: f64, step: f64) -> Result<String, JsError> {
    to_js(sessions_json(timestamps_s, lo, hi, step))
}

#[wasm_bindgen]
pub fn influence(suggestion: &str, before: &str, after: &str) -> Result<String, JsError> {
    to_js(influence_json(suggestion, before, after))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kde_output() {
        let v = kde_json("1, 2 3\n4 5", 0.0, 0.0, 0.0).unwrap();
        assert!((v["area"].as_f64().unwrap() - 1.0).abs() < 1e-3);
        assert_eq!(v["grid"].as_array().unwrap().len(), 256);
        assert!(v["svg"].as_str().unwrap().starts_with("<svg"));
        assert!(kde_json("1 x", 0.0, 0.0, 0.0).is_err());
        assert!(kde_json("1", 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn sweep_finds_two_bursts() {
        let ts = "0 10 20 30 3000 3010 3020 6000 6005";
        let v = sessions_json(ts, 60.0, 1200.0, 60.0).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 20);
        assert_eq!(v["sessions"].as_array().unwrap().len(), 3);
        assert!(sessions_json(ts, 0.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn verbatim_copy_scores_one() {
        let v = influence_json(
            "The owl spoke. It was late.",
            "Night fell.",
            "Night fell. The owl spoke.",
        )
        .unwrap();
        assert_eq!(v["newly_edited"], json!(["The owl spoke."]));
        assert_eq!(v["scores"]["edit"], json!(1.0));
        let none = influence_json("Hello.", "Same.", "Same.").unwrap();
        assert_eq!(none["scores"]["edit"], Value::Null);
    }
}
