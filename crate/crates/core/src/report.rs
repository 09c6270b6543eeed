//! SVG figures and their CSV siblings.
//!
//! Output is plain text built with `fmt::Write`; coordinates are printed
//! with fixed precision so identical inputs give identical bytes.

use std::fmt::Write;

use thiserror::Error;

use crate::activation::ActivationMatrix;
use crate::bias::{BiasReport, Gender, Topic};
use crate::graph::LayerKind;
use crate::reducibility::ReductionReport;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("matrix has no cells")]
    EmptyMatrix,
    #[error("report has no effect sizes")]
    EmptyReport,
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
}

/// Sequential light-to-dark blue ramp.
pub const RAMP: [&str; 8] = ["#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#4292c6", "#2171b5", "#084594"];

/// Series colours, assigned to agents in order of first appearance.
pub const AGENT_PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

const TOPIC_DASH: [&str; 4] = ["", "6,3", "2,3", "8,3,2,3"];
const TOPIC_MARKER: [&str; 4] = ["circle", "square", "triangle", "diamond"];

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

struct Svg {
    out: String,
}

impl Svg {
    fn new(width: f64, height: f64) -> Svg {
        let mut out = String::new();
        writeln!(
            out,
            r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="Helvetica, Arial, sans-serif" font-size="11">
<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="#ffffff"/>"##
        )
        .unwrap();
        Svg { out }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, extra: &str, s: &str) {
        writeln!(self.out, r##"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}"{extra}>{}</text>"##, escape(s)).unwrap();
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        writeln!(self.out, r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" {style}/>"##).unwrap();
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, title: Option<&str>) {
        match title {
            Some(t) => writeln!(
                self.out,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"><title>{}</title></rect>"##,
                escape(t)
            ),
            None => writeln!(self.out, r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"##),
        }
        .unwrap();
    }

    fn marker(&mut self, shape: &str, x: f64, y: f64, color: &str, title: &str) {
        let t = escape(title);
        match shape {
            "square" => writeln!(self.out, r##"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="{color}"><title>{t}</title></rect>"##, x - 3.5, y - 3.5),
            "triangle" => writeln!(
                self.out,
                r##"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"><title>{t}</title></polygon>"##,
                x,
                y - 4.5,
                x - 4.5,
                y + 3.5,
                x + 4.5,
                y + 3.5
            ),
            "diamond" => writeln!(
                self.out,
                r##"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"><title>{t}</title></polygon>"##,
                x,
                y - 4.5,
                x + 4.5,
                y,
                x,
                y + 4.5,
                x - 4.5,
                y
            ),
            _ => writeln!(self.out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"><title>{t}</title></circle>"##),
        }
        .unwrap();
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn check_unique(labels: &[String]) -> Result<(), RenderError> {
    let mut seen = std::collections::BTreeSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(RenderError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStyle {
    pub title: String,
    pub cell: f64,
    /// Colour scale bounds; the data range when `None`.
    pub range: Option<(f64, f64)>,
    /// Rows before this index form the first group; a rule separates them.
    pub group_break: Option<usize>,
}

impl Default for HeatmapStyle {
    fn default() -> Self {
        HeatmapStyle { title: String::new(), cell: 14.0, range: None, group_break: None }
    }
}

pub fn ramp_index(v: f64, lo: f64, hi: f64) -> usize {
    if !(hi > lo) {
        return 0;
    }
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    ((t * RAMP.len() as f64) as usize).min(RAMP.len() - 1)
}

/// One cell per (prime, target), primes as rows.
pub fn render_heatmap(m: &ActivationMatrix, style: &HeatmapStyle) -> Result<String, RenderError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(RenderError::EmptyMatrix);
    }
    check_unique(&m.primes)?;
    check_unique(&m.targets)?;
    let (lo, hi) = style.range.unwrap_or_else(|| {
        m.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    });
    let c = style.cell;
    let label_w = 8.0 + 7.0 * m.primes.iter().map(|p| p.chars().count()).max().unwrap_or(0) as f64;
    let label_h = 8.0 + 6.0 * m.targets.iter().map(|t| t.chars().count()).max().unwrap_or(0) as f64;
    let (x0, y0) = (label_w + 10.0, 34.0);
    let grid_w = c * m.cols() as f64;
    let grid_h = c * m.rows() as f64;
    let legend_y = y0 + grid_h + label_h + 16.0;
    let width = (x0 + grid_w + 20.0).max(x0 + 8.0 * 24.0 + 120.0);
    let mut svg = Svg::new(width, legend_y + 40.0);
    if !style.title.is_empty() {
        svg.text(x0, 20.0, "start", r##" font-size="14" font-weight="bold""##, &style.title);
    }
    for (r, prime) in m.primes.iter().enumerate() {
        let y = y0 + c * r as f64;
        svg.text(x0 - 6.0, y + c * 0.72, "end", "", prime);
        for (col, target) in m.targets.iter().enumerate() {
            let v = m.at(r, col);
            let fill = RAMP[ramp_index(v, lo, hi)];
            svg.rect(x0 + c * col as f64, y, c, c, fill, Some(&format!("{prime} / {target}: {v:.6}")));
        }
    }
    for (col, target) in m.targets.iter().enumerate() {
        let x = x0 + c * col as f64 + c * 0.7;
        let y = y0 + grid_h + 6.0;
        writeln!(
            svg.out,
            r##"<text x="{x:.2}" y="{y:.2}" text-anchor="end" transform="rotate(-90 {x:.2} {y:.2})">{}</text>"##,
            escape(target)
        )
        .unwrap();
    }
    if let Some(b) = style.group_break.filter(|&b| b > 0 && b < m.rows()) {
        let y = y0 + c * b as f64;
        svg.line(x0 - 4.0, y, x0 + grid_w, y, r##"stroke="#000000" stroke-width="2""##);
    }
    for (i, colour) in RAMP.iter().enumerate() {
        svg.rect(x0 + 24.0 * i as f64, legend_y, 24.0, 10.0, colour, None);
    }
    svg.text(x0, legend_y + 24.0, "start", "", &format!("{lo:.4}"));
    svg.text(x0 + 24.0 * RAMP.len() as f64, legend_y + 24.0, "end", "", &format!("{hi:.4}"));
    Ok(svg.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectMode {
    /// One series per (agent, topic).
    Disaggregated,
    /// One series per agent, topics pooled.
    Aggregated,
}

impl EffectMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EffectMode::Disaggregated => "disaggregated",
            EffectMode::Aggregated => "aggregated",
        }
    }
}

struct Series {
    agent_index: usize,
    topic: Option<Topic>,
    label: String,
    points: [Option<f64>; 3],
}

fn effect_series(report: &BiasReport, mode: EffectMode, gender: Gender) -> Vec<Series> {
    let topics: Vec<Option<Topic>> = match mode {
        EffectMode::Disaggregated => Topic::ALL.map(Some).to_vec(),
        EffectMode::Aggregated => vec![None],
    };
    let mut out = Vec::new();
    for (ai, agent) in report.agents().iter().enumerate() {
        for &topic in &topics {
            let mut points = [None; 3];
            for (li, layer) in LayerKind::ALL.iter().enumerate() {
                points[li] = report.find(agent, *layer, topic, gender).and_then(|c| c.effect).map(|e| e.r);
            }
            let label = match topic {
                Some(t) => format!("{agent} {}", t.label()),
                None => agent.clone(),
            };
            out.push(Series { agent_index: ai, topic, label, points });
        }
    }
    out
}

/// Effect size against layer, female-target and male-target panels side by side.
pub fn render_effect_plot(report: &BiasReport, mode: EffectMode) -> Result<String, RenderError> {
    let panels: Vec<(Gender, Vec<Series>)> = Gender::ALL.iter().map(|&g| (g, effect_series(report, mode, g))).collect();
    let extent = panels
        .iter()
        .flat_map(|(_, s)| s.iter().flat_map(|s| s.points.iter().flatten()))
        .fold(None, |m: Option<f64>, &r| Some(m.unwrap_or(0.0).max(r.abs())));
    let Some(extent) = extent else {
        return Err(RenderError::EmptyReport);
    };
    let ymax = ((extent * 10.0).ceil() / 10.0).clamp(0.1, 1.0);
    let (pw, ph, left, top): (f64, f64, f64, f64) = (260.0, 240.0, 56.0, 40.0);
    let gap = 40.0;
    let n_series = panels[0].1.len();
    let legend_x = left + 2.0 * pw + gap + 20.0;
    let width = legend_x + 180.0;
    let height = (top + ph + 60.0).max(top + 16.0 * n_series as f64 + 20.0);
    let mut svg = Svg::new(width, height);
    let title = match mode {
        EffectMode::Disaggregated => "Effect sizes by topic",
        EffectMode::Aggregated => "Effect sizes, topics pooled",
    };
    svg.text(left, 20.0, "start", r##" font-size="14" font-weight="bold""##, title);
    let y_of = |r: f64| top + ph * (ymax - r) / (2.0 * ymax);
    for (pi, (gender, series)) in panels.iter().enumerate() {
        let x0 = left + pi as f64 * (pw + gap);
        let x_of = |li: usize| x0 + pw * (0.5 + li as f64) / 3.0;
        svg.rect(x0, top, pw, ph, "#fafafa", None);
        svg.text(x0 + pw / 2.0, top - 8.0, "middle", r##" font-weight="bold""##, &format!("{} targets", gender.as_str()));
        for k in -2..=2 {
            let r = ymax * k as f64 / 2.0;
            let y = y_of(r);
            svg.line(x0 - 4.0, y, x0, y, r##"stroke="#000000""##);
            svg.text(x0 - 6.0, y + 4.0, "end", "", &format!("{r:.2}"));
        }
        svg.line(x0, y_of(0.0), x0 + pw, y_of(0.0), r##"stroke="#555555" stroke-dasharray="4,3""##);
        for (li, layer) in LayerKind::ALL.iter().enumerate() {
            svg.text(x_of(li), top + ph + 16.0, "middle", "", layer.as_str());
        }
        for s in series {
            let colour = AGENT_PALETTE[s.agent_index % AGENT_PALETTE.len()];
            let ti = s.topic.map_or(0, |t| t as usize);
            let dash = if s.topic.is_some() && !TOPIC_DASH[ti].is_empty() {
                format!(r##" stroke-dasharray="{}""##, TOPIC_DASH[ti])
            } else {
                String::new()
            };
            // consecutive present points are joined; a missing layer breaks the line
            for li in 0..2 {
                if let (Some(a), Some(b)) = (s.points[li], s.points[li + 1]) {
                    svg.line(x_of(li), y_of(a), x_of(li + 1), y_of(b), &format!(r##"stroke="{colour}" stroke-width="1.5"{dash}"##));
                }
            }
            for (li, p) in s.points.iter().enumerate() {
                if let Some(r) = p {
                    let shape = if s.topic.is_some() { TOPIC_MARKER[ti] } else { "circle" };
                    svg.marker(shape, x_of(li), y_of(*r), colour, &format!("{} {}: {r:.4}", s.label, LayerKind::ALL[li]));
                }
            }
        }
        writeln!(svg.out, r##"<rect x="{x0:.2}" y="{top:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#000000"/>"##).unwrap();
    }
    for (i, s) in panels[0].1.iter().enumerate() {
        let y = top + 16.0 * i as f64;
        let colour = AGENT_PALETTE[s.agent_index % AGENT_PALETTE.len()];
        let shape = s.topic.map_or("circle", |t| TOPIC_MARKER[t as usize]);
        svg.marker(shape, legend_x, y, colour, &s.label);
        svg.text(legend_x + 10.0, y + 4.0, "start", "", &s.label);
    }
    svg.text(left - 40.0, top + ph / 2.0, "middle", &format!(r##" transform="rotate(-90 {:.2} {:.2})""##, left - 40.0, top + ph / 2.0), "effect size r");
    Ok(svg.finish())
}

/// The numbers behind an effect plot, one row per point.
pub fn effect_plot_csv(report: &BiasReport, mode: EffectMode) -> String {
    let mut out = String::from("agent,topic,gender,layer,r\n");
    for gender in Gender::ALL {
        for s in effect_series(report, mode, gender) {
            let agent = &report.agents()[s.agent_index];
            for (li, p) in s.points.iter().enumerate() {
                let r = p.map(|r| r.to_string()).unwrap_or_default();
                let topic = s.topic.map_or("all", Topic::as_str);
                writeln!(out, "{agent},{topic},{gender},{},{r}", LayerKind::ALL[li]).unwrap();
            }
        }
    }
    out
}

/// q against number of merges, optimum circled.
pub fn render_q_curve(r: &ReductionReport) -> String {
    let (left, top, pw, ph): (f64, f64, f64, f64) = (60.0, 40.0, 360.0, 220.0);
    let n = r.q_curve.len();
    let mut svg = Svg::new(left + pw + 40.0, top + ph + 90.0);
    svg.text(left, 20.0, "start", r##" font-size="14" font-weight="bold""##, &format!("Relative entropy, {}", r.agent));
    let qs: Vec<f64> = r.q_curve.iter().map(|p| p.q).collect();
    let lo = qs.iter().copied().fold(0.0f64, f64::min);
    let hi = qs.iter().copied().fold(0.0f64, f64::max);
    let (lo, hi) = if hi - lo > 0.0 { (lo - 0.1 * (hi - lo), hi + 0.1 * (hi - lo)) } else { (lo - 1.0, hi + 1.0) };
    let x_of = |i: usize| left + if n > 1 { pw * i as f64 / (n - 1) as f64 } else { pw / 2.0 };
    let y_of = |q: f64| top + ph * (hi - q) / (hi - lo);
    writeln!(svg.out, r##"<rect x="{left:.2}" y="{top:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#000000"/>"##).unwrap();
    for k in 0..=4 {
        let q = lo + (hi - lo) * k as f64 / 4.0;
        svg.line(left - 4.0, y_of(q), left, y_of(q), r##"stroke="#000000""##);
        svg.text(left - 6.0, y_of(q) + 4.0, "end", "", &format!("{q:.3}"));
    }
    if lo < 0.0 && hi > 0.0 {
        svg.line(left, y_of(0.0), left + pw, y_of(0.0), r##"stroke="#888888" stroke-dasharray="4,3""##);
    }
    let points: Vec<String> = qs.iter().enumerate().map(|(i, &q)| format!("{:.2},{:.2}", x_of(i), y_of(q))).collect();
    writeln!(svg.out, r##"<polyline points="{}" fill="none" stroke="#2171b5" stroke-width="2"/>"##, points.join(" ")).unwrap();
    for (i, p) in r.q_curve.iter().enumerate() {
        let label = r.partition_label(&p.partition);
        svg.marker("circle", x_of(i), y_of(p.q), "#2171b5", &format!("{label}: q = {:.6}", p.q));
        let (x, y) = (x_of(i), top + ph + 14.0);
        svg.text(x, y, "middle", "", &format!("{i}"));
        writeln!(
            svg.out,
            r##"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="8">{}</text>"##,
            y + 14.0,
            escape(&label)
        )
        .unwrap();
    }
    let (ox, oy) = (x_of(r.optimal_index), y_of(qs[r.optimal_index]));
    writeln!(svg.out, r##"<circle cx="{ox:.2}" cy="{oy:.2}" r="8" fill="none" stroke="#d95f02" stroke-width="2"><title>optimum</title></circle>"##).unwrap();
    svg.text(ox, oy - 12.0, "middle", r##" fill="#d95f02""##, "optimum");
    svg.text(left + pw / 2.0, top + ph + 56.0, "middle", "", "merges");
    svg.finish()
}
