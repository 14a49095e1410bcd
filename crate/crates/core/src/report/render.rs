//! Figures as hand-written SVG and a JSON report. Every plotted value also
//! appears as a `data-value` attribute so series can be read back.

use super::alarms::{AlarmCounts, AlarmRatios};
use super::taxonomy::{OntologyGroup, YellowGroup};
use super::timeline::{SceneTimeline, Transition};
use crate::codec::write_atomic;
use crate::error::{invalid_input, Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

pub const FIGURES: [&str; 4] = ["timeline.svg", "alarm_counts.svg", "alarm_ratios.svg", "ontology.svg"];
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
    pub probs: Vec<f64>,
    pub highlight: Option<String>,
    pub counts: AlarmCounts,
    pub ratios: AlarmRatios,
    pub ontology: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneReport {
    pub provenance: BTreeMap<String, String>,
    pub segment_s: f64,
    pub threshold: f64,
    pub taxonomy_version: u32,
    pub classes: Vec<String>,
    pub transitions: Vec<Transition>,
    pub segments: Vec<SegmentReport>,
}

pub fn build_report(
    timeline: &SceneTimeline,
    counts: &[AlarmCounts],
    ratios: &[AlarmRatios],
    histograms: &[BTreeMap<String, usize>],
    threshold: f64,
    taxonomy_version: u32,
) -> Result<SceneReport> {
    let n = timeline.segments.len();
    if n == 0 {
        return invalid_input("empty timeline");
    }
    if counts.len() != n || ratios.len() != n || histograms.len() != n {
        return invalid_input(format!(
            "{n} segments but {} count rows, {} ratio rows, {} histograms",
            counts.len(),
            ratios.len(),
            histograms.len()
        ));
    }
    let segments = timeline
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| SegmentReport {
            index: s.index,
            start_s: s.start_s,
            end_s: s.end_s,
            label: s.label.clone(),
            probs: s.probs.clone(),
            highlight: timeline.highlight_of(i).map(str::to_string),
            counts: counts[i].clone(),
            ratios: ratios[i],
            ontology: histograms[i].clone(),
        })
        .collect();
    Ok(SceneReport {
        provenance: BTreeMap::new(),
        segment_s: timeline.segment_s,
        threshold,
        taxonomy_version,
        classes: timeline.classes.clone(),
        transitions: timeline.transitions.clone(),
        segments,
    })
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const W: f64 = 960.0;
const H: f64 = 360.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;
const PLOT_H: f64 = 240.0;
const PALETTE: [&str; 8] = ["#4e79a7", "#59a14f", "#9c755f", "#f28e2b", "#76b7b2", "#edc948", "#b07aa1", "#bab0ac"];

fn open(title: &str, prov: &BTreeMap<String, String>) -> String {
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n");
    for (k, v) in prov {
        let _ = writeln!(s, "<!-- {}: {} -->", esc(k), esc(v).replace("--", "- -"));
    }
    let _ = writeln!(s, "<text x=\"{LEFT}\" y=\"20\" font-size=\"14\">{}</text>", esc(title));
    s
}

fn seg_x(r: &SceneReport, i: usize) -> (f64, f64) {
    let bw = (W - LEFT - 20.0) / r.segments.len() as f64;
    (LEFT + i as f64 * bw, bw)
}

/// Stacked bars per segment; `series` gives (class name, colour, values).
fn stacked(r: &SceneReport, title: &str, y_max: f64, series: &[(String, &str, Vec<f64>)]) -> String {
    let mut s = open(title, &r.provenance);
    let base = TOP + PLOT_H;
    let _ = writeln!(s, "<line x1=\"{LEFT}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>", W - 20.0);
    let _ = writeln!(s, "<text x=\"5\" y=\"{}\">{}</text>", TOP + 4.0, fmt_num(y_max));
    for i in 0..r.segments.len() {
        let (x, bw) = seg_x(r, i);
        let mut y = base;
        for (name, colour, vals) in series {
            let v = vals[i];
            let h = if y_max > 0.0 { v / y_max * PLOT_H } else { 0.0 };
            y -= h;
            let _ = writeln!(
                s,
                "<rect class=\"{}\" data-segment=\"{i}\" data-value=\"{}\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{colour}\"/>",
                esc(name),
                fmt_num(v),
                x + 1.0,
                y,
                bw - 2.0,
                h
            );
        }
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{}\">{}</text>", x + 2.0, base + 14.0, fmt_num(r.segments[i].start_s));
    }
    for (k, (name, colour, _)) in series.iter().enumerate() {
        let lx = LEFT + k as f64 * 130.0;
        let _ = writeln!(s, "<rect x=\"{lx}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{colour}\"/>", H - 40.0);
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">{}</text>", lx + 14.0, H - 31.0, esc(name));
    }
    s.push_str("</svg>\n");
    s
}

/// Shortest decimal that round-trips, so attributes equal the report values.
fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn timeline_svg(r: &SceneReport) -> String {
    let mut s = open("Scene timeline", &r.provenance);
    let y = TOP + 60.0;
    for (i, seg) in r.segments.iter().enumerate() {
        let (x, bw) = seg_x(r, i);
        let k = r.classes.iter().position(|c| *c == seg.label).unwrap_or(0);
        let fill = match seg.highlight.as_deref() {
            Some("red") => "#e15759",
            Some(other) => other,
            None => PALETTE[k % PALETTE.len()],
        };
        let _ = writeln!(
            s,
            "<rect class=\"segment\" data-start=\"{}\" data-end=\"{}\" data-label=\"{}\" data-highlight=\"{}\" x=\"{x:.2}\" y=\"{y}\" width=\"{bw:.2}\" height=\"60\" fill=\"{fill}\" stroke=\"white\"/>",
            fmt_num(seg.start_s),
            fmt_num(seg.end_s),
            esc(&seg.label),
            esc(seg.highlight.as_deref().unwrap_or("")),
        );
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{}\">{}</text>", x + 2.0, y + 80.0, fmt_num(seg.start_s));
    }
    let span = r.segments.last().map(|l| l.end_s).unwrap_or(1.0);
    for t in &r.transitions {
        let x = LEFT + t.time_s / span * (W - LEFT - 20.0);
        let _ = writeln!(
            s,
            "<line class=\"transition\" data-time=\"{}\" x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\" stroke-width=\"2\"/>",
            fmt_num(t.time_s),
            y - 20.0,
            y + 60.0
        );
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{}\" font-size=\"9\">{} | {}</text>", x + 2.0, y - 24.0, esc(&t.before), esc(&t.after));
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_figures(r: &SceneReport) -> Result<Vec<(&'static str, String)>> {
    if r.segments.is_empty() {
        return invalid_input("empty timeline");
    }
    let col = |f: &dyn Fn(&SegmentReport) -> f64| r.segments.iter().map(f).collect::<Vec<f64>>();
    let max_of = |v: &[Vec<f64>]| -> f64 {
        let n = r.segments.len();
        (0..n).map(|i| v.iter().map(|s| s[i]).sum::<f64>()).fold(0.0, f64::max).max(1.0)
    };

    let mut counts: Vec<(String, &str, Vec<f64>)> = vec![("RED".into(), "#e15759", col(&|s| s.counts.red as f64))];
    let ycol = ["#f1ce63", "#edc948", "#d4a017", "#b8860b"];
    for (g, c) in YellowGroup::ALL.iter().zip(ycol) {
        let key = g.as_str();
        counts.push((format!("YELLOW/{key}"), c, col(&|s| *s.counts.yellow_groups.get(key).unwrap_or(&0) as f64)));
    }
    let cmax = max_of(&counts.iter().map(|c| c.2.clone()).collect::<Vec<_>>());

    let ratios: Vec<(String, &str, Vec<f64>)> = vec![
        ("RED".into(), "#e15759", col(&|s| s.ratios.red)),
        ("YELLOW".into(), "#edc948", col(&|s| s.ratios.yellow)),
        ("GREEN".into(), "#59a14f", col(&|s| s.ratios.green)),
    ];

    let mut groups: Vec<String> = OntologyGroup::ALL.iter().map(|g| g.as_str().to_string()).collect();
    for h in r.segments.iter().flat_map(|s| s.ontology.keys()) {
        if !groups.contains(h) {
            groups.push(h.clone());
        }
    }
    let onto: Vec<(String, &str, Vec<f64>)> = groups
        .iter()
        .enumerate()
        .map(|(k, g)| (g.clone(), PALETTE[k % PALETTE.len()], col(&|s| *s.ontology.get(g).unwrap_or(&0) as f64)))
        .collect();
    let omax = max_of(&onto.iter().map(|c| c.2.clone()).collect::<Vec<_>>());

    Ok(vec![
        (FIGURES[0], timeline_svg(r)),
        (FIGURES[1], stacked(r, &format!("Red and yellow alarm events (threshold {})", r.threshold), cmax, &counts)),
        (FIGURES[2], stacked(r, "Alarm level share (%)", 100.0, &ratios)),
        (FIGURES[3], stacked(r, "Detected events per ontology group", omax, &onto)),
    ])
}

pub fn report_json(r: &SceneReport) -> Result<String> {
    serde_json::to_string_pretty(r).map_err(|e| Error::Format(e.to_string()))
}

/// Four figures plus the JSON report; returns the written paths.
pub fn render_report(r: &SceneReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut out = Vec::new();
    for (name, body) in render_figures(r)? {
        let p = out_dir.join(name);
        write_atomic(&p, body.as_bytes())?;
        out.push(p);
    }
    let p = out_dir.join(REPORT_FILE);
    write_atomic(&p, (report_json(r)? + "\n").as_bytes())?;
    out.push(p);
    Ok(out)
}
