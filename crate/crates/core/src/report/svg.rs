use std::fmt::Write;

use super::ReportError;
use crate::metrics::LorenzCurve;

/// A Lorenz curve with the legend text drawn next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCurve {
    pub label: String,
    pub curve: LorenzCurve,
}

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

fn x(share: f64) -> f64 {
    MARGIN + share * SIZE
}

fn y(share: f64) -> f64 {
    MARGIN + (1.0 - share) * SIZE
}

/// Renders curves on a unit square with the line of equality as reference.
pub fn emit_lorenz_svg(curves: &[LabeledCurve]) -> Result<String, ReportError> {
    if curves.is_empty() {
        return Err(ReportError::EmptyCurveList);
    }
    let full = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    // Writing to a String cannot fail.
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#000"/>"##
    );
    let _ = writeln!(
        s,
        r##"<line class="equality" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888" stroke-dasharray="4 3"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    for tick in 0..=4 {
        let t = f64::from(tick) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#,
            x(t),
            y(0.0) + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t}</text>"#,
            x(0.0) - 6.0,
            y(t) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">cumulative share of tracts</text>"#,
        x(0.5),
        full - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(14 {:.1}) rotate(-90)" text-anchor="middle">cumulative share of images</text>"#,
        y(0.5)
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = c
            .curve
            .points
            .iter()
            .map(|&(px, py)| format!("{:.3},{:.3}", x(px), y(py)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        let ly = MARGIN + 20.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            x(0.05),
            x(0.12)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            x(0.14),
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
