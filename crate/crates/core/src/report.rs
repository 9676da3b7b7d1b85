//! CSV tables and SVG density charts for analysis results.

use std::fmt::Write as _;

use thiserror::Error;

use crate::analyses::{InfluenceReport, LatencyReport, ProgressSample, UsageTrend};
use crate::oplog::TaskType;
use crate::stats::KdeCurve;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no curves to draw")]
    NoCurves,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub const LATENCY_HEADER: [&str; 10] = [
    "task_type",
    "samples_system",
    "q25_system_s",
    "q50_system_s",
    "q75_system_s",
    "samples_reading",
    "q25_reading_s",
    "q50_reading_s",
    "q75_reading_s",
    "not_read_rate",
];
pub const USAGE_HEADER: [&str; 3] = ["phase", "task_type", "proportion"];
pub const USAGE_BY_DOC_HEADER: [&str; 4] = ["doc_id", "phase", "task_type", "proportion"];
pub const PROGRESS_HEADER: [&str; 4] = ["read_event_id", "task_type", "window_s", "word_delta"];
pub const INFLUENCE_HEADER: [&str; 4] = ["read_event_id", "task_type", "metric", "score"];
pub const KDE_HEADER: [&str; 3] = ["label", "grid", "density"];

/// Label used for baseline rows in sample tables.
pub const BASELINE_LABEL: &str = "baseline";

pub fn baseline_id(run: usize) -> String {
    format!("{BASELINE_LABEL}-{run}")
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_table<const N: usize>(
    header: [&str; N],
    rows: impl IntoIterator<Item = [String; N]>,
) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn latency_csv(report: &LatencyReport) -> Result<String, ReportError> {
    write_table(
        LATENCY_HEADER,
        report.per_type.iter().map(|t| {
            let sq = t.system_quartiles;
            let rq = t.reading_quartiles;
            [
                t.task_type.to_string(),
                t.system_s.len().to_string(),
                opt(sq.map(|q| q[0])),
                opt(sq.map(|q| q[1])),
                opt(sq.map(|q| q[2])),
                t.reading_s.len().to_string(),
                opt(rq.map(|q| q[0])),
                opt(rq.map(|q| q[1])),
                opt(rq.map(|q| q[2])),
                opt(t.not_read_rate()),
            ]
        }),
    )
}

fn phase_rows(trend: &UsageTrend) -> Vec<(usize, TaskType, String)> {
    let mut rows = Vec::new();
    for (i, phase) in trend.phases.iter().enumerate() {
        let props = phase.proportions();
        for t in TaskType::ALL {
            let p = if phase.total() == 0 {
                String::new()
            } else {
                num(props.get(&t).copied().unwrap_or(0.0))
            };
            rows.push((i + 1, t, p));
        }
    }
    rows
}

/// Four rows per phase (one per task type); proportions are blank in an
/// empty phase.
pub fn usage_csv(trend: &UsageTrend) -> Result<String, ReportError> {
    write_table(
        USAGE_HEADER,
        phase_rows(trend)
            .into_iter()
            .map(|(phase, t, p)| [phase.to_string(), t.to_string(), p]),
    )
}

pub fn usage_by_doc_csv<'a>(
    trends: impl IntoIterator<Item = (&'a String, &'a UsageTrend)>,
) -> Result<String, ReportError> {
    let mut rows = Vec::new();
    for (doc, trend) in trends {
        for (phase, t, p) in phase_rows(trend) {
            rows.push([doc.clone(), phase.to_string(), t.to_string(), p]);
        }
    }
    write_table(USAGE_BY_DOC_HEADER, rows)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgressRow {
    pub read_event_id: String,
    pub task_type: String,
    pub window_s: u64,
    pub word_delta: i64,
}

impl ProgressRow {
    pub fn from_sample(s: &ProgressSample) -> Self {
        Self {
            read_event_id: s.record.suggestion_id.clone(),
            task_type: s.record.task_type.to_string(),
            window_s: s.window_s,
            word_delta: s.word_delta,
        }
    }

    pub fn baseline(run: usize, window_s: u64, word_delta: i64) -> Self {
        Self {
            read_event_id: baseline_id(run),
            task_type: BASELINE_LABEL.to_string(),
            window_s,
            word_delta,
        }
    }
}

pub fn progress_csv(rows: &[ProgressRow]) -> Result<String, ReportError> {
    write_table(
        PROGRESS_HEADER,
        rows.iter().map(|r| {
            [
                r.read_event_id.clone(),
                r.task_type.clone(),
                r.window_s.to_string(),
                r.word_delta.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceRow {
    pub read_event_id: String,
    pub task_type: String,
    pub metric: String,
    pub score: f64,
}

impl InfluenceRow {
    pub fn from_report(report: &InfluenceReport) -> Vec<Self> {
        report
            .samples
            .iter()
            .map(|s| Self {
                read_event_id: s.record.suggestion_id.clone(),
                task_type: s.record.task_type.to_string(),
                metric: s.metric.to_string(),
                score: s.score,
            })
            .collect()
    }
}

pub fn influence_csv(rows: &[InfluenceRow]) -> Result<String, ReportError> {
    write_table(
        INFLUENCE_HEADER,
        rows.iter().map(|r| {
            [
                r.read_event_id.clone(),
                r.task_type.clone(),
                r.metric.clone(),
                num(r.score),
            ]
        }),
    )
}

pub fn kde_csv(curves: &[(String, KdeCurve)]) -> Result<String, ReportError> {
    let rows = curves.iter().flat_map(|(label, c)| {
        c.grid
            .iter()
            .zip(&c.density)
            .map(move |(g, d)| [label.clone(), num(*g), num(*d)])
    });
    write_table(KDE_HEADER, rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "value".into(),
            y_label: "density".into(),
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#7f7f7f", "#9467bd", "#8c564b", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Self-contained SVG with one polyline per curve and a legend in input
/// order. Curves may sit on different grids.
pub fn emit_kde_svg(curves: &[(String, KdeCurve)], style: &SvgStyle) -> Result<String, ReportError> {
    if curves.is_empty() {
        return Err(ReportError::NoCurves);
    }
    let xs = curves.iter().flat_map(|(_, c)| c.grid.iter().copied());
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !x0.is_finite() || !x1.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let y_max = curves
        .iter()
        .flat_map(|(_, c)| c.density.iter().copied())
        .filter(|y| y.is_finite())
        .fold(0.0, f64::max);
    let y1 = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| TOP + plot_h - y / y1 * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    if !style.title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(&style.title)
        );
    }
    let (bx, by) = (LEFT, TOP + plot_h);
    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="1"><line x1="{bx:.2}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}"/><line x1="{bx:.2}" y1="{TOP:.2}" x2="{bx:.2}" y2="{by:.2}"/></g>"#,
        LEFT + plot_w
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = x0 + f * (x1 - x0);
        let yv = f * y1;
        let _ = writeln!(
            out,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"#,
            px(xv),
            by,
            by + 5.0,
            by + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="black"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"#,
            bx - 5.0,
            py(yv),
            bx,
            bx - 8.0,
            py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0:.2}" text-anchor="middle" transform="rotate(-90 16 {0:.2})">{1}</text>"#,
        TOP + plot_h / 2.0,
        escape(&style.y_label)
    );
    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = curve
            .grid
            .iter()
            .zip(&curve.density)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 20.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(grid: Vec<f64>, density: Vec<f64>) -> KdeCurve {
        KdeCurve {
            grid,
            density,
            bandwidth: 1.0,
            clip: None,
        }
    }

    #[test]
    fn svg_requires_curves() {
        assert!(matches!(
            emit_kde_svg(&[], &SvgStyle::default()),
            Err(ReportError::NoCurves)
        ));
    }

    #[test]
    fn flat_curve_draws_axes_and_one_line() {
        let svg = emit_kde_svg(
            &[("zero".into(), curve(vec![0.0, 1.0, 2.0], vec![0.0; 3]))],
            &SvgStyle::default(),
        )
        .unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("viewBox=\"0 0 800 400\""));
        assert!(svg.contains(">zero</text>"));
    }

    #[test]
    fn legend_in_input_order_and_deterministic() {
        let labels = ["crowd", "story_plot", "gpt3_plot", "gpt3_continuation", "baseline"];
        let curves: Vec<(String, KdeCurve)> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.to_string(), curve(vec![0.0, 1.0 + i as f64], vec![0.1, 0.2])))
            .collect();
        let a = emit_kde_svg(&curves, &SvgStyle::default()).unwrap();
        let b = emit_kde_svg(&curves, &SvgStyle::default()).unwrap();
        assert_eq!(a, b);
        let positions: Vec<usize> = labels
            .iter()
            .map(|l| a.find(&format!(">{l}</text>")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.matches("<polyline").count(), 5);
    }

    #[test]
    fn csv_quoting() {
        let rows = vec![InfluenceRow {
            read_event_id: "a,b".into(),
            task_type: "crowd".into(),
            metric: "edit".into(),
            score: 0.5,
        }];
        assert_eq!(
            influence_csv(&rows).unwrap(),
            "read_event_id,task_type,metric,score\n\"a,b\",crowd,edit,0.5\n"
        );
    }
}
