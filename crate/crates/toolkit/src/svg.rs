//! Minimal deterministic SVG charts: line plots and scatter plots with a
//! legend. Coordinates are printed with fixed precision so identical inputs
//! give identical files.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const LEGEND_W: f64 = 150.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#111111"];

pub struct Line<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub dashed: bool,
    pub values: &'a [f64],
}

pub struct Points<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub xy: &'a [(f64, f64)],
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN - LEGEND_W)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

/// Padded finite range; never degenerate.
fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, frame: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let (l, r) = (MARGIN, WIDTH - MARGIN - LEGEND_W);
    let (t, b) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(out, r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#888"/>"##, r - l, b - t);
    for (v, x) in [(frame.x0, l), (frame.x1, r)] {
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{v:.3}</text>"#, b + 14.0);
    }
    for (v, y) in [(frame.y0, b), (frame.y1, t)] {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">{v:.3}</text>"#, l - 4.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    let x = WIDTH - LEGEND_W - MARGIN + 12.0;
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64 + 6.0;
        let _ = writeln!(out, r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#, y - 8.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, x + 14.0, escape(label));
    }
}

/// One polyline per series against the step index.
pub fn line_plot(title: &str, y_label: &str, lines: &[Line]) -> String {
    let max_len = lines.iter().map(|l| l.values.len()).max().unwrap_or(0);
    let frame = Frame::new(
        [0.0, max_len.saturating_sub(1).max(1) as f64].into_iter(),
        lines.iter().flat_map(|l| l.values.iter().copied()),
    );
    let mut out = String::new();
    header(&mut out, title, &frame, "time step", y_label);
    for line in lines {
        let pts: Vec<String> = line
            .values
            .iter()
            .enumerate()
            .map(|(t, v)| format!("{:.2},{:.2}", frame.px(t as f64), frame.py(*v)))
            .collect();
        let dash = if line.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#, line.color, pts.join(" "));
    }
    legend(&mut out, &lines.iter().map(|l| (l.label, l.color)).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

pub fn scatter_plot(title: &str, x_label: &str, y_label: &str, sets: &[Points]) -> String {
    let all = || sets.iter().flat_map(|s| s.xy.iter());
    let frame = Frame::new(all().map(|p| p.0), all().map(|p| p.1));
    let mut out = String::new();
    header(&mut out, title, &frame, x_label, y_label);
    for set in sets {
        let _ = writeln!(out, r#"<g fill="{}" fill-opacity="0.6">"#, set.color);
        for (x, y) in set.xy {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#, frame.px(*x), frame.py(*y));
        }
        out.push_str("</g>\n");
    }
    legend(&mut out, &sets.iter().map(|s| (s.label, s.color)).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}
