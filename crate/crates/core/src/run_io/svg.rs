use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::metrics::{metric_column, read_metrics, METRICS_HEADER};

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct ChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Fixed y range; values outside are clamped.
    pub y_range: Option<(f64, f64)>,
    /// Categorical x ticks; numeric ticks when absent.
    pub x_ticks: Option<Vec<(f64, String)>>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Renders line series as a standalone SVG document. Non-finite points are
/// dropped; every series gets its own `id="series-N"` polyline.
pub fn line_chart(spec: &ChartSpec, series: &[Series]) -> String {
    let clamp = |y: f64| match spec.y_range {
        Some((lo, hi)) => y.clamp(lo, hi),
        None => y,
    };
    let clean: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| (x, clamp(y)))
                .collect()
        })
        .collect();
    let (x0, x1) = bounds(clean.iter().flatten().map(|p| p.0));
    let (y0, y1) = spec
        .y_range
        .unwrap_or_else(|| bounds(clean.iter().flatten().map(|p| p.1)));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="grey"/>"#
    );
    let x_ticks: Vec<(f64, String)> = match &spec.x_ticks {
        Some(t) => t.clone(),
        None => (0..=4)
            .map(|i| {
                let x = x0 + (x1 - x0) * i as f64 / 4.0;
                (
                    x,
                    format!("{x:.4}")
                        .trim_end_matches('0')
                        .trim_end_matches('.')
                        .to_string(),
                )
            })
            .collect(),
    };
    for (x, label) in x_ticks {
        let px = sx(x);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="grey"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            escape(&label)
        );
    }
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let py = sy(y);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="grey"/><text x="{}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            y
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&spec.y_label)
    );
    for (i, (ser, pts)) in series.iter().zip(&clean).enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline id="series-{i}" fill="none" stroke="{colour}" stroke-width="1.8" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_chart(spec: &ChartSpec, series: &[Series], path: &Path) -> Result<()> {
    fs::write(path, line_chart(spec, series)).map_err(|e| Error::io(path, e))
}

/// Plots one metrics column from several runs' `metrics.csv` files against
/// episode. `runs` pairs a legend label with a metrics path.
pub fn emit_svg_curves(metric: &str, runs: &[(String, &Path)], out: &Path) -> Result<()> {
    if metric == "episode" || !METRICS_HEADER.contains(&metric) {
        let valid: Vec<&str> = METRICS_HEADER[1..].to_vec();
        return Err(Error::Usage(format!(
            "unknown metric `{metric}`; valid metrics: {}",
            valid.join(", ")
        )));
    }
    let mut series = Vec::with_capacity(runs.len());
    for (name, path) in runs {
        let rows = read_metrics(path)?;
        let ys = metric_column(&rows, metric).expect("metric validated above");
        series.push(Series {
            name: name.clone(),
            points: rows.iter().map(|r| r.episode as f64).zip(ys).collect(),
        });
    }
    let spec = ChartSpec {
        title: metric.to_string(),
        x_label: "episode".into(),
        y_label: metric.to_string(),
        y_range: (metric == "win_rate").then_some((0.0, 1.0)),
        x_ticks: None,
    };
    write_chart(&spec, &series, out)
}
