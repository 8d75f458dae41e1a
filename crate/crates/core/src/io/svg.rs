//! Minimal SVG 1.1 scatter plots. Output depends only on the inputs.

use std::fmt::Write as _;

/// One plotted point with its fill color.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub color: String,
}

/// A titled scatter panel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub title: String,
    pub points: Vec<Point>,
}

const PANEL: f64 = 320.0;
const MARGIN: f64 = 30.0;

/// Maps `t` in `[0, 1]` onto a dark-blue → yellow ramp.
pub fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let r = (30.0 + 225.0 * t).round() as u8;
    let g = (30.0 + 190.0 * t).round() as u8;
    let b = (120.0 * (1.0 - t) + 40.0).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Colors values by their rank-free linear position between min and max.
pub fn ramp_colors(values: &[f64]) -> Vec<String> {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    values.iter().map(|v| ramp((v - lo) / span)).collect()
}

/// Panels side by side sharing one square coordinate window.
pub fn scatter_svg(panels: &[Panel]) -> String {
    let all = panels.iter().flat_map(|p| p.points.iter());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in all {
        for v in [p.x, p.y] {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !(hi > lo) {
        lo = -1.0;
        hi = 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let scale = (PANEL - 2.0 * MARGIN) / (hi - lo);
    let width = PANEL * panels.len().max(1) as f64;

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{PANEL:.0}\" viewBox=\"0 0 {width:.0} {PANEL:.0}\">"
    )
    .expect("write to string");
    writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").expect("write to string");
    for (k, panel) in panels.iter().enumerate() {
        let ox = k as f64 * PANEL;
        let sx = |x: f64| ox + MARGIN + (x - lo) * scale;
        let sy = |y: f64| PANEL - MARGIN - (y - lo) * scale;
        writeln!(out, "<g>").expect("write to string");
        writeln!(
            out,
            "<text x=\"{:.2}\" y=\"18\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            ox + PANEL / 2.0,
            escape(&panel.title)
        )
        .expect("write to string");
        if lo < 0.0 && hi > 0.0 {
            writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\" stroke-width=\"0.5\"/>",
                sx(lo), sy(0.0), sx(hi), sy(0.0)
            )
            .expect("write to string");
            writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\" stroke-width=\"0.5\"/>",
                sx(0.0), sy(lo), sx(0.0), sy(hi)
            )
            .expect("write to string");
        }
        writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{MARGIN:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.5\"/>",
            ox + MARGIN,
            PANEL - 2.0 * MARGIN,
            PANEL - 2.0 * MARGIN
        )
        .expect("write to string");
        for p in &panel.points {
            if p.x.is_finite() && p.y.is_finite() {
                writeln!(
                    out,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.6\" fill=\"{}\"/>",
                    sx(p.x),
                    sy(p.y),
                    escape(&p.color)
                )
                .expect("write to string");
            }
        }
        writeln!(out, "</g>").expect("write to string");
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        let panel = Panel {
            title: "a<b".into(),
            points: vec![
                Point { x: -1.0, y: 2.0, color: "red".into() },
                Point { x: 3.0, y: f64::NAN, color: "blue".into() },
            ],
        };
        let a = scatter_svg(&[panel.clone(), panel.clone()]);
        let b = scatter_svg(&[panel.clone(), panel]);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<circle").count(), 2);
        assert!(a.contains("a&lt;b"));
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#1e1ea0");
        assert_eq!(ramp(1.0), "#ffdc28");
        assert_eq!(ramp_colors(&[1.0, 1.0]).len(), 2);
    }
}
