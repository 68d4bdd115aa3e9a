//! Minimal deterministic SVG charts: lines, scatter points, shaded bands and
//! reference lines.

use std::fmt::Write;

pub const BLUE: &str = "#1f5fbf";
pub const RED: &str = "#c0392b";
pub const GREEN: &str = "#2e8b3a";
pub const GREY: &str = "#888888";
/// Cycled for per-cluster or per-agent colouring.
pub const PALETTE: [&str; 8] = ["#1f5fbf", "#c0392b", "#2e8b3a", "#8e44ad", "#d68910", "#17a589", "#7f8c8d", "#a04000"];

const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub color: String,
    /// `(x, lower, upper)` triples in x order.
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
/// Dashed reference line across the plot at a fixed coordinate.
pub struct RefLine {
    pub label: String,
    pub color: String,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: f64,
    pub height: f64,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub lines: Vec<Line>,
    pub bands: Vec<Band>,
    pub scatters: Vec<Scatter>,
    pub hlines: Vec<RefLine>,
    pub vlines: Vec<RefLine>,
}

impl Chart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            width: 640.0,
            height: 420.0,
            x_range: None,
            y_range: None,
            lines: Vec::new(),
            bands: Vec::new(),
            scatters: Vec::new(),
            hlines: Vec::new(),
            vlines: Vec::new(),
        }
    }

    pub fn line(mut self, label: impl Into<String>, color: &str, points: Vec<(f64, f64)>) -> Self {
        self.lines.push(Line { label: label.into(), color: color.into(), points, width: 2.0 });
        self
    }

    pub fn thin_line(mut self, label: impl Into<String>, color: &str, points: Vec<(f64, f64)>) -> Self {
        self.lines.push(Line { label: label.into(), color: color.into(), points, width: 0.8 });
        self
    }

    pub fn band(mut self, color: &str, points: Vec<(f64, f64, f64)>) -> Self {
        self.bands.push(Band { color: color.into(), points });
        self
    }

    pub fn scatter(mut self, label: impl Into<String>, color: &str, points: Vec<(f64, f64)>) -> Self {
        self.scatters.push(Scatter { label: label.into(), color: color.into(), points });
        self
    }

    pub fn hline(mut self, label: impl Into<String>, color: &str, y: f64) -> Self {
        self.hlines.push(RefLine { label: label.into(), color: color.into(), at: y });
        self
    }

    /// Vertical reference line at `x`.
    pub fn vline(mut self, label: impl Into<String>, color: &str, x: f64) -> Self {
        self.vlines.push(RefLine { label: label.into(), color: color.into(), at: x });
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }

    pub fn x_range(mut self, lo: f64, hi: f64) -> Self {
        self.x_range = Some((lo, hi));
        self
    }

    fn data_bounds(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for l in &self.lines {
            xs.extend(l.points.iter().map(|p| p.0));
            ys.extend(l.points.iter().map(|p| p.1));
        }
        for s in &self.scatters {
            xs.extend(s.points.iter().map(|p| p.0));
            ys.extend(s.points.iter().map(|p| p.1));
        }
        for b in &self.bands {
            xs.extend(b.points.iter().map(|p| p.0));
            ys.extend(b.points.iter().flat_map(|p| [p.1, p.2]));
        }
        ys.extend(self.hlines.iter().map(|h| h.at));
        xs.extend(self.vlines.iter().map(|v| v.at));
        let span = |v: &[f64]| {
            let finite = v.iter().copied().filter(|x| x.is_finite());
            let lo = finite.clone().fold(f64::INFINITY, f64::min);
            let hi = finite.fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        (self.x_range.unwrap_or_else(|| span(&xs)), self.y_range.unwrap_or_else(|| span(&ys)))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.data_bounds();
        let pw = self.width - MARGIN_LEFT - MARGIN_RIGHT;
        let ph = self.height - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_TOP + ph - (y - y0) / (y1 - y0) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(s, r#"<rect width="{}" height="{}" fill="white"/>"#, self.width, self.height);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            self.width / 2.0,
            escape(&self.title)
        );

        for b in &self.bands {
            if b.points.is_empty() {
                continue;
            }
            let mut d = String::new();
            for (i, (x, _, hi)) in b.points.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(*x), sy(*hi));
            }
            for (x, lo, _) in b.points.iter().rev() {
                let _ = write!(d, "L{:.2},{:.2} ", sx(*x), sy(*lo));
            }
            let _ = writeln!(s, r#"<path d="{}Z" fill="{}" fill-opacity="0.2" stroke="none"/>"#, d, b.color);
        }

        // Axes and ticks.
        let _ = writeln!(
            s,
            r#"<path d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2}" fill="none" stroke="black"/>"#,
            MARGIN_LEFT,
            MARGIN_TOP,
            MARGIN_LEFT,
            MARGIN_TOP + ph,
            MARGIN_LEFT + pw,
            MARGIN_TOP + ph
        );
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                sx(xv),
                MARGIN_TOP + ph + 18.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 6.0,
                sy(yv) + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            self.height - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            MARGIN_TOP + ph / 2.0,
            MARGIN_TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for h in &self.hlines {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-dasharray="6,4"><title>{}</title></line>"#,
                MARGIN_LEFT,
                MARGIN_LEFT + pw,
                h.color,
                escape(&h.label),
                y = sy(h.at)
            );
        }
        for v in &self.vlines {
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{}" stroke-dasharray="6,4"><title>{}</title></line>"#,
                MARGIN_TOP,
                MARGIN_TOP + ph,
                v.color,
                escape(&v.label),
                x = sx(v.at)
            );
        }
        for l in &self.lines {
            let pts: Vec<String> = l
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            if pts.len() == 1 {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{}" cy="{}" r="2.5" fill="{}"><title>{}</title></circle>"#,
                    pts[0].split(',').next().unwrap_or("0"),
                    pts[0].split(',').nth(1).unwrap_or("0"),
                    l.color,
                    escape(&l.label)
                );
            } else if !pts.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="{}"><title>{}</title></polyline>"#,
                    pts.join(" "),
                    l.color,
                    l.width,
                    escape(&l.label)
                );
            }
        }
        for sc in &self.scatters {
            let _ = writeln!(s, r#"<g fill="{}" fill-opacity="0.8"><title>{}</title>"#, sc.color, escape(&sc.label));
            for &(x, y) in sc.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, sx(x), sy(y));
            }
            s.push_str("</g>\n");
        }

        // Legend for labelled lines and scatter sets.
        let mut ly = MARGIN_TOP + 8.0;
        let legend: Vec<(&str, &str)> = self
            .lines
            .iter()
            .filter(|l| l.width >= 1.0)
            .map(|l| (l.label.as_str(), l.color.as_str()))
            .chain(self.scatters.iter().map(|s| (s.label.as_str(), s.color.as_str())))
            .chain(self.hlines.iter().chain(&self.vlines).map(|h| (h.label.as_str(), h.color.as_str())))
            .filter(|(label, _)| !label.is_empty())
            .collect();
        for (label, color) in legend {
            let lx = MARGIN_LEFT + pw - 150.0;
            let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{}"/>"#, lx, ly - 10.0, color);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 18.0, ly, escape(label));
            ly += 16.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
