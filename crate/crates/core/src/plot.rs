//! Static SVG line chart of an orbit.

use std::fmt::Write as _;

use crate::simulate::OrbitTrace;

pub const WIDTH: f64 = 960.0;
pub const HEIGHT: f64 = 540.0;

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Above this many points the orbit is reduced to per-column min/max pairs.
const MAX_POINTS: usize = 4_000;

/// Renders `A[n]` against `n` with one horizontal marker at `x_bar`.
///
/// With `log_y` the vertical axis shows `ln A[n]`.
pub fn render_svg(trace: &OrbitTrace, x_bar: f64, log_y: bool) -> String {
    let to_y = |ln_a: f64| if log_y { ln_a } else { ln_a.exp() };
    let points: Vec<(f64, f64)> = trace.indexed().map(|(n, y)| (n as f64, to_y(y))).collect();
    let points = decimate(points);
    let marker = to_y(x_bar.ln());

    let (n0, n1) = (
        points.first().map_or(0.0, |p| p.0),
        points.last().map_or(1.0, |p| p.0),
    );
    let (mut lo, mut hi) = points
        .iter()
        .fold((marker, marker), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        let pad = 0.05 * hi.abs().max(1e-3);
        lo -= pad;
        hi += pad;
    }
    let n_span = if n1 > n0 { n1 - n0 } else { 1.0 };
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |n: f64| MARGIN_LEFT + (n - n0) / n_span * plot_w;
    let sy = |v: f64| MARGIN_TOP + (hi - v) / (hi - lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r##"<rect class="frame" x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    let mut coords = String::with_capacity(points.len() * 16);
    for (n, v) in &points {
        let _ = write!(coords, "{:.2},{:.2} ", sx(*n), sy(*v));
    }
    let _ = writeln!(
        svg,
        r##"<polyline class="orbit" fill="none" stroke="#1f6fb4" stroke-width="1" points="{}"/>"##,
        coords.trim_end()
    );
    let ym = sy(marker);
    let _ = writeln!(
        svg,
        r##"<line class="equilibrium" x1="{MARGIN_LEFT}" y1="{ym:.2}" x2="{:.2}" y2="{ym:.2}" stroke="#c0392b" stroke-dasharray="6 4"/>"##,
        WIDTH - MARGIN_RIGHT
    );
    let y_label = if log_y { "ln A_n" } else { "A_n" };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">n</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" font-size="14" transform="rotate(-90 16 {})" text-anchor="middle">{y_label}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );
    for (v, label) in [(hi, hi), (lo, lo), (marker, marker)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            sy(v) + 4.0,
            crate::numfmt::fmt_sig(label, 4)
        );
    }
    for n in [n0, n1] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            sx(n),
            HEIGHT - MARGIN_BOTTOM + 16.0,
            n as i64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Keeps the min and max of each of `MAX_POINTS / 2` equal index buckets.
fn decimate(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points;
    }
    let buckets = MAX_POINTS / 2;
    let len = points.len();
    let mut out = Vec::with_capacity(MAX_POINTS);
    for b in 0..buckets {
        let chunk = &points[b * len / buckets..(b + 1) * len / buckets];
        let lo = chunk
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("chunk");
        let hi = chunk
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("chunk");
        if lo.0 <= hi.0 {
            out.extend([*lo, *hi]);
        } else {
            out.extend([*hi, *lo]);
        }
    }
    out
}
