//! Hand-written SVG figures: cost against term count with envelopes and
//! human systems, the term-count histogram, and the consensus strip chart.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::human::HumanCost;
use crate::tables::*;

pub const COST_PLOT: &str = "cost_vs_terms.svg";
pub const HISTOGRAM_PLOT: &str = "term_histogram.svg";
pub const CONSENSUS_PLOT: &str = "consensus.svg";

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 10] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

/// Linear map from data space to the plot area.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Frame {
    pub fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    pub fn y(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn header(svg: &mut String) {
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
}

fn axes(svg: &mut String, f: &Frame, xticks: &[f64], yticks: &[f64], xlabel: &str, ylabel: &str) {
    let (xa, xb, ya, yb) = (f.x(f.x0), f.x(f.x1), f.y(f.y0), f.y(f.y1));
    let _ = writeln!(svg, r#"<path d="M{xa:.2},{yb:.2} L{xa:.2},{ya:.2} L{xb:.2},{ya:.2}" fill="none" stroke="black"/>"#);
    for &t in xticks {
        let x = f.x(t);
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{ya:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, ya + 4.0);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#, ya + 18.0);
    }
    for &t in yticks {
        let y = f.y(t);
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{y:.2}" x2="{xa:.2}" y2="{y:.2}" stroke="black"/>"#, xa - 4.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t}</text>"#, xa - 7.0, y + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#, (xa + xb) / 2.0, H - 12.0);
    let _ = writeln!(svg, r#"<text transform="translate(16,{:.2}) rotate(-90)" text-anchor="middle">{ylabel}</text>"#, (ya + yb) / 2.0);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn polyline(svg: &mut String, f: &Frame, pts: &[(f64, f64)], stroke: &str, dash: bool, label: &str) {
    if pts.is_empty() {
        return;
    }
    let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.x(x), f.y(y))).collect();
    let dash = if dash { r#" stroke-dasharray="6,4""# } else { "" };
    let _ = writeln!(svg, r#"<polyline class="envelope" data-series="{label}" points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash}/>"#, d.join(" "));
}

/// Frame for the cost scatter: terms on x, cost in bits on y from zero to
/// the next half bit above every plotted value.
pub fn cost_frame(results: &[ResultRow], envelope: &[EnvelopeCsvRow], humans: &[HumanCost]) -> Frame {
    let max_terms = envelope.iter().map(|e| e.terms).chain(results.iter().map(|r| r.terms)).chain(humans.iter().map(|h| h.terms)).max().unwrap_or(1);
    let top = envelope
        .iter()
        .flat_map(|e| [e.best_cost, e.worst_cost])
        .flatten()
        .chain(results.iter().map(|r| r.cost_bits))
        .chain(humans.iter().map(|h| h.cost_bits))
        .fold(0.0f64, f64::max);
    Frame { x0: 0.5, x1: max_terms as f64 + 0.5, y0: 0.0, y1: ((top / 0.5).floor() + 1.0) * 0.5 }
}

pub fn cost_plot(results: &[ResultRow], envelope: &[EnvelopeCsvRow], humans: &[HumanCost]) -> String {
    let f = cost_frame(results, envelope, humans);
    let mut svg = String::new();
    header(&mut svg);
    let xticks: Vec<f64> = (1..=(f.x1 - 0.5) as usize).map(|k| k as f64).collect();
    let yticks: Vec<f64> = (0..=((f.y1 / 0.5) as usize)).map(|i| i as f64 * 0.5).collect();
    axes(&mut svg, &f, &xticks, &yticks, "Number of terms", "Communication cost (bits)");
    for (kind, dash) in [("exact", false), ("approximate", true)] {
        let rows: Vec<&EnvelopeCsvRow> = envelope.iter().filter(|e| e.kind == kind).collect();
        let best: Vec<(f64, f64)> = rows.iter().filter_map(|e| e.best_cost.map(|c| (e.terms as f64, c))).collect();
        let worst: Vec<(f64, f64)> = rows.iter().filter_map(|e| e.worst_cost.map(|c| (e.terms as f64, c))).collect();
        polyline(&mut svg, &f, &best, "#222222", dash, &format!("{kind}-best"));
        polyline(&mut svg, &f, &worst, "#888888", dash, &format!("{kind}-worst"));
    }
    for r in results {
        let _ = writeln!(
            svg,
            r##"<circle class="pair" cx="{:.2}" cy="{:.2}" r="3" fill="#4e79a7" fill-opacity="0.35"/>"##,
            f.x(r.terms as f64),
            f.y(r.cost_bits)
        );
    }
    for h in humans {
        let (x, y) = (f.x(h.terms as f64), f.y(h.cost_bits));
        let title = format!("<title>{}</title>", escape(&h.language));
        let data = format!(r#"data-language="{}" data-terms="{}" data-cost="{}""#, escape(&h.language), h.terms, h.cost_bits);
        if h.kind == "exact" {
            let _ = writeln!(svg, r##"<rect class="human" {data} x="{:.2}" y="{:.2}" width="8" height="8" fill="none" stroke="#e15759" stroke-width="1.5">{title}</rect>"##, x - 4.0, y - 4.0);
        } else {
            let _ = writeln!(
                svg,
                r##"<polygon class="human" {data} points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="#f28e2b" stroke-width="1.5">{title}</polygon>"##,
                x,
                y - 5.0,
                x - 5.0,
                y + 4.0,
                x + 5.0,
                y + 4.0
            );
        }
    }
    let legend = [
        ("#222222", "best (solid exact, dashed approximate)"),
        ("#888888", "worst"),
        ("#4e79a7", "agent pairs"),
        ("#e15759", "human exact"),
        ("#f28e2b", "human approximate"),
    ];
    for (i, (color, label)) in legend.iter().enumerate() {
        let y = TOP + 10.0 + i as f64 * 16.0;
        let _ = writeln!(svg, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, W - 260.0, y - 9.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{y:.2}">{label}</text>"#, W - 244.0);
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn histogram_plot(hist: &[HistogramRow]) -> String {
    let max_terms = hist.iter().map(|h| h.terms).max().unwrap_or(1);
    let top = hist.iter().map(|h| h.count).max().unwrap_or(0).max(1);
    let step = ((top as f64 / 5.0).ceil() as usize).max(1);
    let ymax = top.div_ceil(step) * step;
    let f = Frame { x0: 0.5, x1: max_terms as f64 + 0.5, y0: 0.0, y1: ymax as f64 };
    let mut svg = String::new();
    header(&mut svg);
    let xticks: Vec<f64> = (1..=max_terms).map(|k| k as f64).collect();
    let yticks: Vec<f64> = (0..=ymax).step_by(step).map(|c| c as f64).collect();
    axes(&mut svg, &f, &xticks, &yticks, "Number of terms", "Pairs");
    let bar = (f.x(1.0) - f.x(0.0)) * 0.7;
    for h in hist {
        let (x, y, base) = (f.x(h.terms as f64), f.y(h.count as f64), f.y(0.0));
        let _ = writeln!(svg, r##"<rect class="bar" data-terms="{}" data-count="{}" x="{:.2}" y="{y:.2}" width="{bar:.2}" height="{:.2}" fill="#4e79a7"/>"##, h.terms, h.count, x - bar / 2.0, base - y);
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn consensus_plot(rows: &[ConsensusRow]) -> String {
    // Room for `reward, k terms` labels.
    let left = 130.0;
    let mut groups: Vec<(&str, usize)> = rows.iter().map(|r| (r.reward.as_str(), r.terms)).collect();
    groups.dedup();
    let numbers = rows.iter().map(|r| r.n).max().unwrap_or(1) as f64;
    let cell = ((W - left - RIGHT) / numbers).min(28.0);
    let height = TOP + BOTTOM + groups.len() as f64 * (cell + 6.0);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height:.2}" viewBox="0 0 {W} {height:.2}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{height:.2}" fill="white"/>"#);
    for (g, &(reward, terms)) in groups.iter().enumerate() {
        let y = TOP + g as f64 * (cell + 6.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{reward}, {terms} terms</text>"#, left - 6.0, y + cell * 0.65);
        for r in rows.iter().filter(|r| r.reward == reward && r.terms == terms) {
            let x = left + (r.n - 1) as f64 * cell;
            let color = PALETTE[r.word % PALETTE.len()];
            let _ = writeln!(svg, r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{cell:.2}" fill="{color}" stroke="white"/>"#, cell);
        }
    }
    let base = TOP + groups.len() as f64 * (cell + 6.0) + 14.0;
    for n in 1..=numbers as u32 {
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{base:.2}" text-anchor="middle">{n}</text>"#, left + (n as f64 - 0.5) * cell);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Render every figure whose inputs exist. The cost plot needs both
/// `results.csv` and `envelope.csv`.
pub fn emit_plots(out: &Path) -> Result<Vec<PathBuf>> {
    let results: Vec<ResultRow> = read_rows(&out.join(RESULTS))?;
    let envelope: Vec<EnvelopeCsvRow> = read_rows(&out.join(ENVELOPE))?;
    let humans: Vec<HumanCost> = if out.join(HUMANS).exists() { read_rows(&out.join(HUMANS))? } else { Vec::new() };
    let mut written = Vec::new();
    let path = out.join(COST_PLOT);
    fs::write(&path, cost_plot(&results, &envelope, &humans))?;
    written.push(path);
    let words = envelope.iter().map(|e| e.terms).max().unwrap_or(1);
    let path = out.join(HISTOGRAM_PLOT);
    fs::write(&path, histogram_plot(&crate::run::term_histogram(&results, words)))?;
    written.push(path);
    if out.join(CONSENSUS).exists() {
        let rows: Vec<ConsensusRow> = read_rows(&out.join(CONSENSUS))?;
        let path = out.join(CONSENSUS_PLOT);
        fs::write(&path, consensus_plot(&rows))?;
        written.push(path);
    }
    Ok(written)
}
