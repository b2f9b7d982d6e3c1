//! Minimal SVG 1.1 charts: stacked panels with axes, polylines, bars and
//! reference lines. Coordinates are printed with two decimals so output is
//! byte-stable.

use std::fmt::Write;

use crate::series::YearMonth;

pub const BLACK: &str = "#222222";
pub const GRAY: &str = "#8c8c8c";
pub const RED: &str = "#c0392b";
pub const BLUE: &str = "#1f5fa8";

#[derive(Debug, Clone)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

impl Line {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        Self { label: label.into(), points, color, dashed: false }
    }

    /// `ys[i]` plotted at `x = i`; `None` leaves a gap.
    pub fn indexed(label: impl Into<String>, ys: impl IntoIterator<Item = Option<f64>>, offset: f64, color: &'static str) -> Self {
        let points = ys
            .into_iter()
            .enumerate()
            .map(|(i, y)| (i as f64 + offset, y.unwrap_or(f64::NAN)))
            .collect();
        Self::new(label, points, color)
    }
}

#[derive(Debug, Clone)]
pub struct Bars {
    pub label: String,
    /// (left edge, height)
    pub bins: Vec<(f64, f64)>,
    pub width: f64,
    pub color: &'static str,
}

#[derive(Debug, Clone)]
pub struct Marker {
    pub at: f64,
    pub label: String,
    pub color: &'static str,
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub lines: Vec<Line>,
    pub bars: Vec<Bars>,
    pub vlines: Vec<Marker>,
    pub hlines: Vec<Marker>,
    pub x_ticks: Vec<(f64, String)>,
}

impl Panel {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), ..Self::default() }
    }
}

/// January ticks every `every` years for a series starting at `start`.
pub fn year_ticks(start: YearMonth, len: usize, every: i32) -> Vec<(f64, String)> {
    (0..len)
        .filter_map(|i| {
            let m = start.add_months(i as i64);
            (m.month == 1 && m.year % every == 0).then(|| (i as f64, m.year.to_string()))
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// "Nice" tick step for roughly five intervals.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    step * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".into()
    } else {
        s
    }
}

const WIDTH: f64 = 760.0;
const PANEL_HEIGHT: f64 = 220.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 30.0;

pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, p) in panels.iter().enumerate() {
        let _ = writeln!(s, r#"<g transform="translate(0,{:.2})">"#, k as f64 * PANEL_HEIGHT);
        panel(&mut s, p);
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

fn panel(s: &mut String, p: &Panel) {
    let xs = p
        .lines
        .iter()
        .flat_map(|l| l.points.iter().map(|q| q.0))
        .chain(p.bars.iter().flat_map(|b| b.bins.iter().flat_map(move |q| [q.0, q.0 + b.width])))
        .chain(p.vlines.iter().map(|m| m.at));
    let ys = p
        .lines
        .iter()
        .flat_map(|l| l.points.iter().map(|q| q.1))
        .chain(p.bars.iter().flat_map(|b| b.bins.iter().flat_map(|q| [0.0, q.1])))
        .chain(p.hlines.iter().map(|m| m.at));
    let (x0, x1) = extent(xs).unwrap_or((0.0, 1.0));
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 1.0, x1 + 1.0) };
    let (y0, y1) = padded(extent(ys).unwrap_or((0.0, 1.0)));
    let (pw, ph) = (WIDTH - LEFT - RIGHT, PANEL_HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let _ = writeln!(s, r#"<text x="{LEFT:.2}" y="{:.2}" font-size="13">{}</text>"#, TOP - 10.0, escape(&p.title));
    let _ = writeln!(s, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="{BLACK}"/>"#);

    let step = tick_step(y1 - y0);
    let mut v = (y0 / step).ceil() * step;
    while v <= y1 {
        let y = sy(v);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="{BLACK}"/>"#, LEFT - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(v, step));
        v += step;
    }
    for (x, label) in &p.x_ticks {
        let xp = sx(*x);
        let yb = TOP + ph;
        let _ = writeln!(s, r#"<line x1="{xp:.2}" y1="{yb:.2}" x2="{xp:.2}" y2="{:.2}" stroke="{BLACK}"/>"#, yb + 4.0);
        let _ = writeln!(s, r#"<text x="{xp:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, yb + 16.0, escape(label));
    }

    let mut legend: Vec<(&str, &str, bool)> = Vec::new();
    for b in &p.bars {
        for &(left, h) in &b.bins {
            let (xa, xb) = (sx(left), sx(left + b.width));
            let (ya, yb) = (sy(h.max(0.0)), sy(0.0));
            let _ = writeln!(
                s,
                r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.55"/>"#,
                (xb - xa).max(0.0),
                (yb - ya).max(0.0),
                b.color
            );
        }
        legend.push((&b.label, b.color, false));
    }
    for l in &p.lines {
        let dash = if l.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        for run in l.points.split(|q| !q.1.is_finite()) {
            if run.is_empty() {
                continue;
            }
            let pts: Vec<String> = run.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.4"{dash}/>"#, pts.join(" "), l.color);
        }
        legend.push((&l.label, l.color, l.dashed));
    }
    for m in &p.hlines {
        let y = sy(m.at);
        let _ = writeln!(s, r#"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-dasharray="4,3"/>"#, LEFT + pw, m.color);
        legend.push((&m.label, m.color, true));
    }
    for m in &p.vlines {
        let x = sx(m.at);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="{}" stroke-dasharray="2,2"/>"#, TOP + ph, m.color);
        legend.push((&m.label, m.color, true));
    }
    for (i, (label, color, dashed)) in legend.iter().enumerate() {
        if label.is_empty() {
            continue;
        }
        let (x, y) = (LEFT + pw + 10.0, TOP + 12.0 + 15.0 * i as f64);
        let dash = if *dashed { r#" stroke-dasharray="4,3""# } else { "" };
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"{dash}/>"#, y - 4.0, x + 16.0, y - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, x + 20.0, escape(label));
    }
}
