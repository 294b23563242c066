//! Minimal SVG line plots.

use std::fmt::Write;

use crate::simcore::{Mode, Trajectory};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    (x0, x1, y0 - pad, y1 + pad)
}

/// Keeps at most `max` points by uniform striding (the last point always kept).
fn thin(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(max);
    let mut out: Vec<_> = points.iter().step_by(stride).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().expect("non-empty"));
    }
    out
}

impl LinePlot {
    pub fn to_svg(&self) -> String {
        let (x0, x1, y0, y1) = bounds(&self.series);
        let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(fx),
                HEIGHT - MARGIN + 16.0,
                tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN - 4.0,
                sy(fy) + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = thin(&series.points, 2000)
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let dash = if series.dashed { r#" stroke-dasharray="6 3""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{}"/>"#,
                path.join(" ")
            );
            let ly = MARGIN + 14.0 + 14.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#,
                WIDTH - MARGIN - 6.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-2 && v.abs() < 1e4) {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `‖e_i(t)‖` for every node.
pub fn error_plot(traj: &Trajectory) -> LinePlot {
    let title = match traj.mode {
        Mode::Resilient => "Estimation errors (resilient observers)",
        Mode::Baseline => "Estimation errors (baseline observers)",
    };
    LinePlot {
        title: title.into(),
        x_label: "t [s]".into(),
        y_label: "‖e_i‖".into(),
        series: (0..traj.nodes())
            .map(|i| Series {
                label: format!("node {}", i + 1),
                points: (0..traj.len())
                    .map(|k| (traj.times[k], traj.e(k, i).iter().map(|v| v * v).sum::<f64>().sqrt()))
                    .collect(),
                dashed: false,
            })
            .collect(),
    }
}

/// First component of `u_i` per node, with attacked nodes' `f_i` dashed.
pub fn detector_plot(traj: &Trajectory) -> LinePlot {
    let mut series = Vec::new();
    for i in 0..traj.nodes() {
        if traj.inputs.f[i].is_empty() {
            continue;
        }
        series.push(Series {
            label: format!("u{}", i + 1),
            points: (0..traj.len()).map(|k| (traj.times[k], traj.u(k, i)[0])).collect(),
            dashed: false,
        });
        if (0..traj.len()).any(|k| traj.f(k, i)[0] != 0.0) {
            series.push(Series {
                label: format!("f{}", i + 1),
                points: (0..traj.len()).map(|k| (traj.times[k], traj.f(k, i)[0])).collect(),
                dashed: true,
            });
        }
    }
    LinePlot {
        title: "Detector outputs and injected attacks".into(),
        x_label: "t [s]".into(),
        y_label: "u_i, f_i".into(),
        series,
    }
}
