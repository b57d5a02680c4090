//! Static SVG line plots of the Monte Carlo series.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::metrics::{Metrics, Series};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 110.0;
const MARGIN_Y: f64 = 40.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// File stem, title and y label of each emitted plot.
pub const PLOTS: [(&str, &str, &str); 4] = [
    ("estimation-position", "Average position estimation error", "|s_hat - s| (m)"),
    ("estimation-velocity", "Average velocity estimation error", "|v_hat - v| (m/s)"),
    ("relative-position", "Average position relative to vehicle 1", "s_i - s_1 (m)"),
    ("relative-velocity", "Average velocity relative to vehicle 1", "v_i - v_1 (m/s)"),
];

fn bounds(series: &Series) -> (f64, f64) {
    let (lo, hi) = series
        .values()
        .flatten()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// One line per vehicle against wall time `t·T`.
pub fn render_svg(series: &Series, sampling_time: f64, title: &str, y_label: &str) -> String {
    let steps = series.values().map(Vec::len).max().unwrap_or(0);
    let t_max = (steps.max(1) as f64) * sampling_time;
    let (y_lo, y_hi) = bounds(series);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let x_of = |t: f64| MARGIN_LEFT + plot_w * t / t_max;
    let y_of = |v: f64| MARGIN_Y + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="22" font-size="15" text-anchor="middle">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let v = y_lo + frac * (y_hi - y_lo);
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            tick_label(v)
        );
        let t = frac * t_max;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x_of(t),
            MARGIN_Y + plot_h + 16.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 6.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{y_label}</text>"#,
        MARGIN_Y + plot_h / 2.0
    );
    for (k, (vehicle, values)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut points = String::new();
        for (step, v) in values.iter().enumerate().filter(|(_, v)| v.is_finite()) {
            let _ = write!(points, "{:.2},{:.2} ", x_of((step + 1) as f64 * sampling_time), y_of(*v));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            points.trim_end()
        );
        let ly = MARGIN_Y + 14.0 + 18.0 * k as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">vehicle {vehicle}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// Writes the four plots into `dir`, returning their paths.
pub fn emit_plots(metrics: &Metrics, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let series = [&metrics.eta_s, &metrics.eta_v, &metrics.zeta_s, &metrics.zeta_v];
    let mut paths = Vec::with_capacity(PLOTS.len());
    for ((stem, title, y_label), s) in PLOTS.iter().zip(series) {
        let path = dir.join(format!("{stem}.svg"));
        std::fs::write(&path, render_svg(s, metrics.sampling_time, title, y_label)).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
