//! Minimal deterministic SVG line charts.

use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Solid,
    Dashed,
    Dotted,
    /// Unconnected markers.
    Points,
    /// Unconnected crosses.
    Crosses,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub style: Style,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: &str, color: &'static str, style: Style, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.to_string(),
            color,
            style,
            points,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub equal_aspect: bool,
    pub series: Vec<Series>,
}

const W: f64 = 720.0;
const H: f64 = 540.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let k = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    k * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Chart {
    pub fn render(&self) -> String {
        let pts = self
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut y0, mut x1, mut y1) = pts.fold(
            (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), p| (a.min(p.0), b.min(p.1), c.max(p.0), d.max(p.1)),
        );
        if !x0.is_finite() {
            (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
        }
        if x1 - x0 < 1e-9 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-9 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad_x = 0.03 * (x1 - x0);
        let pad_y = 0.03 * (y1 - y0);
        (x0, x1, y0, y1) = (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y);
        let pw = W - MARGIN_L - MARGIN_R;
        let ph = H - MARGIN_T - MARGIN_B;
        if self.equal_aspect {
            let scale = (pw / (x1 - x0)).min(ph / (y1 - y0));
            let cx = 0.5 * (x0 + x1);
            let cy = 0.5 * (y0 + y1);
            x0 = cx - 0.5 * pw / scale;
            x1 = cx + 0.5 * pw / scale;
            y0 = cy - 0.5 * ph / scale;
            y1 = cy + 0.5 * ph / scale;
        }
        let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_T + ph - (y - y0) / (y1 - y0) * ph;

        let mut o = String::new();
        let _ = writeln!(o, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            o,
            r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
        );
        let _ = writeln!(
            o,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            MARGIN_L + pw / 2.0,
            escape(&self.title)
        );
        // Grid and ticks.
        let step = nice_step(x1 - x0);
        let mut t = (x0 / step).ceil() * step;
        while t <= x1 {
            let x = sx(t);
            let _ = writeln!(
                o,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                MARGIN_T,
                MARGIN_T + ph,
                MARGIN_T + ph + 16.0,
                tick_label(t, step)
            );
            t += step;
        }
        let step = nice_step(y1 - y0);
        let mut t = (y0 / step).ceil() * step;
        while t <= y1 {
            let y = sy(t);
            let _ = writeln!(
                o,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                MARGIN_L,
                MARGIN_L + pw,
                MARGIN_L - 6.0,
                y + 4.0,
                tick_label(t, step)
            );
            t += step;
        }
        let _ = writeln!(
            o,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            o,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            H - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        );

        for s in &self.series {
            let finite = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite());
            match s.style {
                Style::Solid | Style::Dashed | Style::Dotted => {
                    let mut d = String::new();
                    for (x, y) in finite {
                        let _ = write!(d, "{:.2},{:.2} ", sx(*x), sy(*y));
                    }
                    let dash = match s.style {
                        Style::Dashed => r#" stroke-dasharray="8 4""#,
                        Style::Dotted => r#" stroke-dasharray="2 3""#,
                        _ => "",
                    };
                    let _ = writeln!(
                        o,
                        r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                        s.color,
                        d.trim_end()
                    );
                }
                Style::Points => {
                    for (x, y) in finite {
                        let _ = writeln!(
                            o,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                            sx(*x),
                            sy(*y),
                            s.color
                        );
                    }
                }
                Style::Crosses => {
                    for (x, y) in finite {
                        let (cx, cy) = (sx(*x), sy(*y));
                        let _ = writeln!(
                            o,
                            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{}" stroke-width="1.5"/>"#,
                            cx - 4.0,
                            cy - 4.0,
                            cx + 4.0,
                            cy + 4.0,
                            cx - 4.0,
                            cy + 4.0,
                            cx + 4.0,
                            cy - 4.0,
                            s.color
                        );
                    }
                }
            }
        }

        // Legend.
        let lx = MARGIN_L + pw + 12.0;
        for (i, s) in self.series.iter().enumerate() {
            let y = MARGIN_T + 12.0 + 20.0 * i as f64;
            let sample = match s.style {
                Style::Points => format!(
                    r#"<circle cx="{:.1}" cy="{y:.1}" r="3" fill="{}"/>"#,
                    lx + 12.0,
                    s.color
                ),
                Style::Crosses => format!(
                    r#"<path d="M{:.1},{:.1}L{:.1},{:.1}M{:.1},{:.1}L{:.1},{:.1}" stroke="{}" stroke-width="1.5"/>"#,
                    lx + 8.0,
                    y - 4.0,
                    lx + 16.0,
                    y + 4.0,
                    lx + 8.0,
                    y + 4.0,
                    lx + 16.0,
                    y - 4.0,
                    s.color
                ),
                style => {
                    let dash = match style {
                        Style::Dashed => r#" stroke-dasharray="8 4""#,
                        Style::Dotted => r#" stroke-dasharray="2 3""#,
                        _ => "",
                    };
                    format!(
                        r#"<line x1="{lx:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="1.5"{dash}/>"#,
                        lx + 24.0,
                        s.color
                    )
                }
            };
            let _ = writeln!(
                o,
                r#"{sample}<text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 30.0,
                y + 4.0,
                escape(&s.label)
            );
        }
        o.push_str("</svg>\n");
        o
    }
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    };
    let s = format!("{v:.decimals$}");
    // Avoid "-0".
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}
