//! Text renderings of point lists: CSV and a small hand-written SVG.

use std::fmt::Write;

use crate::model::SurplusPoint;
use crate::polygon::SurplusPolygon;

/// Decimal text of `x` rounded to 12 significant digits, shortest form.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        // also folds −0
        "0".to_string()
    } else {
        rounded.to_string()
    }
}

pub fn points_csv(points: &[SurplusPoint]) -> String {
    let mut out = String::from("consumer,producer\n");
    for p in points {
        let _ = writeln!(out, "{},{}", format_sig(p.consumer), format_sig(p.producer));
    }
    out
}

/// How a polygon is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    /// Filled, solid outline.
    Solid,
    /// Light fill, thin outline.
    Faint,
    /// Dashed outline, no fill.
    Dashed,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

/// Layers are drawn in order; consumer utility runs right, producer up.
pub fn svg(layers: &[(&SurplusPolygon, Style, &str)]) -> String {
    let all: Vec<SurplusPoint> = layers.iter().flat_map(|(p, _, _)| p.vertices().iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in &all {
        x0 = x0.min(p.consumer);
        x1 = x1.max(p.consumer);
        y0 = y0.min(p.producer);
        y1 = y1.max(p.producer);
    }
    let span_x = (x1 - x0).max(1e-9);
    let span_y = (y1 - y0).max(1e-9);
    let sx = |c: f64| MARGIN + (c - x0) / span_x * (WIDTH - 2.0 * MARGIN);
    let sy = |p: f64| HEIGHT - MARGIN - (p - y0) / span_y * (HEIGHT - 2.0 * MARGIN);
    let coord = |v: f64| format!("{v:.2}");

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    // axes through the origin of the plotted box
    let (ax, ay) = (sx(x0), sy(y0));
    let _ = writeln!(
        out,
        r#"<path d="M{} {} H{} M{} {} V{}" stroke="black" stroke-width="1" fill="none"/>"#,
        coord(ax),
        coord(ay),
        coord(WIDTH - MARGIN / 2.0),
        coord(ax),
        coord(ay),
        coord(MARGIN / 2.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="end">consumer utility</text>"#,
        coord(WIDTH - MARGIN / 2.0),
        coord(HEIGHT - MARGIN / 4.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13">producer utility</text>"#,
        coord(ax + 6.0),
        coord(MARGIN / 2.0 - 6.0)
    );
    for (poly, style, label) in layers {
        let (stroke, fill, extra) = match style {
            Style::Solid => ("#1f4e99", "#1f4e99", r#" fill-opacity="0.35" stroke-width="2""#),
            Style::Faint => ("#7a7a7a", "#bbbbbb", r#" fill-opacity="0.3" stroke-width="1""#),
            Style::Dashed => ("black", "none", r#" stroke-width="1.5" stroke-dasharray="6 4""#),
        };
        let _ = writeln!(out, "<g><title>{label}</title>");
        match poly.vertices() {
            [] => {}
            [p] => {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{}" cy="{}" r="4" fill="{stroke}"/>"#,
                    coord(sx(p.consumer)),
                    coord(sy(p.producer))
                );
            }
            vs => {
                let pts: Vec<String> =
                    vs.iter().map(|p| format!("{},{}", coord(sx(p.consumer)), coord(sy(p.producer)))).collect();
                let _ = writeln!(
                    out,
                    r#"<polygon points="{}" stroke="{stroke}" fill="{fill}"{extra}/>"#,
                    pts.join(" ")
                );
            }
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}
