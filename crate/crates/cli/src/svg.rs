//! Minimal SVG line charts: one polyline per landscape, coloured from blue
//! (fragmented, low `s`) to red (aggregated, high `s`).

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub s: u64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Blue at `w = 0`, red at `w = 1`.
pub fn colour(w: f64) -> String {
    let w = if w.is_finite() { w.clamp(0.0, 1.0) } else { 0.0 };
    let r = (30.0 + 200.0 * w).round() as u8;
    let g = 40;
    let b = (230.0 - 200.0 * w).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Round tick positions covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|f| f * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    }
}

impl Chart {
    pub fn render(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let (x0, x1) = range(all().map(|p| p.0));
        let (mut y0, y1) = range(all().map(|p| p.1));
        if y0 > 0.0 && y0 < 0.5 * y1 {
            y0 = 0.0;
        }
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;
        let (s_lo, s_hi) = self
            .series
            .iter()
            .fold((u64::MAX, 0), |(lo, hi), s| (lo.min(s.s), hi.max(s.s)));
        let weight = |s: u64| {
            if s_hi > s_lo {
                (s - s_lo) as f64 / (s_hi - s_lo) as f64
            } else {
                0.0
            }
        };

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );
        for t in ticks(x0, x1, 6) {
            let x = sx(t);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{b2}" stroke="black"/><text x="{x:.2}" y="{ty}" text-anchor="middle">{}</text>"#,
                tick_label(t),
                b = TOP + plot_h,
                b2 = TOP + plot_h + 5.0,
                ty = TOP + plot_h + 19.0,
            );
        }
        for t in ticks(y0, y1, 6) {
            let y = sy(t);
            let _ = writeln!(
                out,
                r#"<line x1="{l2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{}</text>"#,
                tick_label(t),
                l2 = LEFT - 5.0,
                tx = LEFT - 8.0,
                ty = y + 4.0,
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="20" y="{cy}" text-anchor="middle" transform="rotate(-90 20 {cy})">{}</text>"#,
            escape(&self.y_label),
            cy = TOP + plot_h / 2.0
        );

        for series in &self.series {
            let pts: Vec<String> = series
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>s = {}</title></polyline>"#,
                colour(weight(series.s)),
                pts.join(" "),
                series.s
            );
        }

        // Legend, one entry per distinct s, thinned to at most 16 labels.
        let mut legend: Vec<u64> = self.series.iter().map(|s| s.s).collect();
        legend.sort_unstable();
        legend.dedup();
        let stride = legend.len().div_ceil(16).max(1);
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(out, r#"<text x="{lx}" y="{}">s</text>"#, TOP + 4.0);
        for (row, &s) in legend.iter().step_by(stride).enumerate() {
            let y = TOP + 20.0 + 18.0 * row as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="3"/><text x="{}" y="{}">{s}</text>"#,
                lx + 24.0,
                colour(weight(s)),
                lx + 30.0,
                y + 4.0
            );
        }
        out.push_str("</svg>\n");
        out
    }
}
