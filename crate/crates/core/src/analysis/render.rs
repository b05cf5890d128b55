//! Hand-written SVG 1.1. All coordinates are printed with two decimals so
//! identical inputs give byte-identical documents.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::aggregate::AggregateCurve;
use super::confusion::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const LIGHT_PALETTE: &[&str] = &[
    "#c6dbef", "#fdd0a2", "#c7e9c0", "#fcbba1", "#dadaeb", "#d9c3bc", "#f7c8e4", "#d9d9d9", "#ecedb0", "#b8ecf2",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Lightest and darkest confusion-matrix fills.
const CELL_LIGHT: [f64; 3] = [255.0, 255.0, 255.0];
const CELL_DARK: [f64; 3] = [8.0, 48.0, 107.0];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="#ffffff"/>"##);
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    } else {
        let pad = if lo.abs() > 0.0 { lo.abs() * 0.5 } else { 1.0 };
        (lo - pad, hi + pad)
    }
}

fn points_attr(points: impl Iterator<Item = (f64, f64)>) -> String {
    points
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Line chart of aggregate curves: mean as a solid line, per-step min and
/// max dashed, and a translucent band of one standard deviation
/// (square root of the variance) around the mean. One legend entry per curve.
pub fn render_curves_svg<T: Scalar>(curves: &[AggregateCurve<T>], title: &str) -> Result<String> {
    if curves.is_empty() || curves.iter().all(|c| c.steps.is_empty()) {
        return Err(Error::EmptyInput("no curves to render".into()));
    }
    let f = |v: T| v.to_f64_lossy();
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in curves {
        for i in 0..c.steps.len() {
            let s = c.steps[i] as f64;
            let sd = f(c.variance[i]).max(0.0).sqrt();
            x_lo = x_lo.min(s);
            x_hi = x_hi.max(s);
            y_lo = y_lo.min(f(c.min[i])).min(f(c.mean[i]) - sd);
            y_hi = y_hi.max(f(c.max[i])).max(f(c.mean[i]) + sd);
        }
    }
    let (x_lo, x_hi) = if x_hi > x_lo { (x_lo, x_hi) } else { (x_lo - 1.0, x_hi + 1.0) };
    let (y_lo, y_hi) = padded_range(y_lo, y_hi);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |s: f64| LEFT + (s - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |v: f64| TOP + (y_hi - v) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    axes(&mut out, (LEFT, TOP, plot_w, plot_h), (x_lo, x_hi), (y_lo, y_hi));

    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let n = c.steps.len();
        let step = |i: usize| c.steps[i] as f64;
        let sd = |i: usize| f(c.variance[i]).max(0.0).sqrt();
        let upper = (0..n).map(|i| (sx(step(i)), sy(f(c.mean[i]) + sd(i))));
        let lower = (0..n).rev().map(|i| (sx(step(i)), sy(f(c.mean[i]) - sd(i))));
        let _ = writeln!(
            out,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            points_attr(upper.chain(lower))
        );
        for (class, series) in [("min", &c.min), ("max", &c.max)] {
            let _ = writeln!(
                out,
                r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="1" stroke-dasharray="4 3"/>"#,
                points_attr((0..n).map(|i| (sx(step(i)), sy(f(series[i])))))
            );
        }
        let _ = writeln!(
            out,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points_attr((0..n).map(|i| (sx(step(i)), sy(f(c.mean[i])))))
        );
    }

    let lx = WIDTH - RIGHT + 20.0;
    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let y = TOP + 10.0 + 20.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<g class="legend-entry"><line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{} ({})</text></g>"#,
            lx + 24.0,
            lx + 30.0,
            y + 4.0,
            escape(&c.metric),
            c.split
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn axes(out: &mut String, (left, top, w, h): (f64, f64, f64, f64), (x_lo, x_hi): (f64, f64), (y_lo, y_hi): (f64, f64)) {
    let bottom = top + h;
    let _ = writeln!(
        out,
        r##"<g class="axes" stroke="#333333" stroke-width="1"><line x1="{left:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}"/><line x1="{left:.2}" y1="{top:.2}" x2="{left:.2}" y2="{bottom:.2}"/></g>"##,
        left + w
    );
    for t in 0..=4 {
        let frac = t as f64 / 4.0;
        let xv = x_lo + frac * (x_hi - x_lo);
        let yv = y_lo + frac * (y_hi - y_lo);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            left + frac * w,
            bottom + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            bottom - frac * h + 4.0,
            tick_label(yv)
        );
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_owned() } else { s.to_owned() }
}

fn cell_fill(count: u64, max: u64) -> String {
    let ratio = if max == 0 { 0.0 } else { count as f64 / max as f64 };
    let ch = |i: usize| (CELL_LIGHT[i] + (CELL_DARK[i] - CELL_LIGHT[i]) * ratio).round() as u8;
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

/// Grid of cells whose darkness is linear in `count / max_count`, with the
/// count printed in each cell and class names on both axes.
pub fn render_confusion_svg(cm: &ConfusionMatrix, class_names: &[String]) -> Result<String> {
    cm.validate()?;
    if class_names.len() != cm.n_classes {
        return Err(Error::Shape(format!(
            "{} class names for {} classes",
            class_names.len(),
            cm.n_classes
        )));
    }
    let cell = 48.0;
    let left = 110.0;
    let top = 70.0;
    let n = cm.n_classes as f64;
    let width = left + n * cell + 20.0;
    let height = top + n * cell + 30.0;
    let max = cm.max_count();

    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle">predicted</text>"#,
        left + n * cell / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">true</text>"#,
        top + n * cell / 2.0,
        top + n * cell / 2.0
    );
    for (j, name) in class_names.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text class="col-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            left + (j as f64 + 0.5) * cell,
            top - 10.0,
            escape(name)
        );
    }
    for (i, name) in class_names.iter().enumerate() {
        let y = top + i as f64 * cell;
        let _ = writeln!(
            out,
            r#"<text class="row-label" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y + cell / 2.0 + 4.0,
            escape(name)
        );
        for (j, &count) in cm.counts[i].iter().enumerate() {
            let x = left + j as f64 * cell;
            let dark = max > 0 && count * 2 > max;
            let _ = writeln!(
                out,
                r##"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}" stroke="#999999"/><text x="{:.2}" y="{:.2}" text-anchor="middle" fill="{}">{count}</text>"##,
                cell_fill(count, max),
                x + cell / 2.0,
                y + cell / 2.0 + 4.0,
                if dark { "#ffffff" } else { "#000000" }
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Axis-aligned rectangle in data coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.xmin, self.xmax, self.ymin, self.ymax].iter().all(|v| v.is_finite())
            && self.xmin < self.xmax
            && self.ymin < self.ymax;
        if ok {
            Ok(())
        } else {
            Err(Error::Spec(format!("degenerate bounds {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub label: usize,
}

/// Heatmap of a row-major class lattice (row 0 at `ymin`) with the labeled
/// points drawn on top.
pub fn render_decision_svg(grid: &[usize], resolution: usize, bounds: Bounds, points: &[ScatterPoint]) -> Result<String> {
    bounds.validate()?;
    if resolution < 2 || grid.len() != resolution * resolution {
        return Err(Error::Shape(format!(
            "grid of {} cells does not match resolution {resolution}",
            grid.len()
        )));
    }
    let size = 480.0;
    let margin = 20.0;
    let cell = size / resolution as f64;
    let sx = |x: f64| margin + (x - bounds.xmin) / (bounds.xmax - bounds.xmin) * size;
    let sy = |y: f64| margin + (bounds.ymax - y) / (bounds.ymax - bounds.ymin) * size;

    let mut out = String::new();
    header(&mut out, size + 2.0 * margin, size + 2.0 * margin);
    out.push_str("<g class=\"regions\" shape-rendering=\"crispEdges\">\n");
    for row in 0..resolution {
        for col in 0..resolution {
            let class = grid[row * resolution + col];
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                margin + col as f64 * cell,
                margin + size - (row + 1) as f64 * cell,
                cell,
                cell,
                LIGHT_PALETTE[class % LIGHT_PALETTE.len()]
            );
        }
    }
    out.push_str("</g>\n<g class=\"points\" stroke=\"#ffffff\" stroke-width=\"0.5\">\n");
    for p in points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
            sx(p.x),
            sy(p.y),
            PALETTE[p.label % PALETTE.len()]
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}
