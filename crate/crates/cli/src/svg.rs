//! Minimal SVG writer: lines, polylines, circles, rectangles and text, plus a
//! plotting frame that maps data coordinates onto a panel with axes.

use std::fmt::Write as _;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Coordinates are written with two decimals; that keeps files small and is
/// far below a pixel.
fn c(v: f64) -> String {
    format!("{v:.2}")
}

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
    depth: usize,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Svg { width, height, body: String::new(), depth: 0 }
    }

    pub fn open_group(&mut self, attrs: &[(&str, String)]) {
        self.body.push_str("<g");
        for (k, v) in attrs {
            let _ = write!(self.body, " {k}=\"{}\"", escape(v));
        }
        self.body.push_str(">\n");
        self.depth += 1;
    }

    pub fn close_group(&mut self) {
        assert!(self.depth > 0, "unbalanced group");
        self.depth -= 1;
        self.body.push_str("</g>\n");
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64, dash: Option<&str>) {
        let _ = write!(
            self.body,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"{width}\"",
            c(x1),
            c(y1),
            c(x2),
            c(y2)
        );
        if let Some(d) = dash {
            let _ = write!(self.body, " stroke-dasharray=\"{d}\"");
        }
        self.body.push_str("/>\n");
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, width: f64, dash: Option<&str>) {
        if points.len() < 2 {
            return;
        }
        let pts: Vec<String> = points.iter().map(|&(x, y)| format!("{},{}", c(x), c(y))).collect();
        let _ = write!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"",
            pts.join(" ")
        );
        if let Some(d) = dash {
            let _ = write!(self.body, " stroke-dasharray=\"{d}\"");
        }
        self.body.push_str("/>\n");
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, "<circle cx=\"{}\" cy=\"{}\" r=\"{r}\" fill=\"{fill}\"/>", c(x), c(y));
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: Option<&str>) {
        let _ = write!(
            self.body,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"",
            c(x),
            c(y),
            c(w.max(0.0)),
            c(h.max(0.0))
        );
        if let Some(s) = stroke {
            let _ = write!(self.body, " stroke=\"{s}\"");
        }
        self.body.push_str("/>\n");
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{}\" y=\"{}\" font-size=\"{size}\" text-anchor=\"{anchor}\">{}</text>",
            c(x),
            c(y),
            escape(content)
        );
    }

    pub fn rotated_text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{0}\" y=\"{1}\" font-size=\"{size}\" text-anchor=\"middle\" transform=\"rotate(-90 {0} {1})\">{2}</text>",
            c(x),
            c(y),
            escape(content)
        );
    }

    pub fn finish(self) -> String {
        assert_eq!(self.depth, 0, "unclosed group");
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Roughly `target` evenly spaced round tick values covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// A rectangular panel with a data window.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    pub fn sx(&self, v: f64) -> f64 {
        self.left + (v - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    pub fn sy(&self, v: f64) -> f64 {
        self.top + self.height - (v - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1
    }

    /// Border, ticks, tick labels and an optional title.
    pub fn draw_axes(&self, svg: &mut Svg, title: &str) {
        svg.rect(self.left, self.top, self.width, self.height, "none", Some("#444"));
        for t in ticks(self.x.0, self.x.1, 4) {
            let px = self.sx(t);
            svg.line(px, self.top + self.height, px, self.top + self.height + 4.0, "#444", 1.0, None);
            svg.text(px, self.top + self.height + 14.0, 9.0, "middle", &tick_label(t));
        }
        for t in ticks(self.y.0, self.y.1, 4) {
            let py = self.sy(t);
            svg.line(self.left - 4.0, py, self.left, py, "#444", 1.0, None);
            svg.line(self.left, py, self.left + self.width, py, "#eee", 0.5, None);
            svg.text(self.left - 6.0, py + 3.0, 9.0, "end", &tick_label(t));
        }
        if !title.is_empty() {
            svg.text(self.left + self.width / 2.0, self.top - 6.0, 10.0, "middle", title);
        }
    }
}

/// Pads a data range by 5% each side; a degenerate range is widened around its value.
pub fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi <= lo {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// One legend row per `(colour, label, dashed)` entry.
pub fn legend(svg: &mut Svg, x: f64, y: f64, entries: &[(&str, String, bool)]) {
    for (k, (colour, label, dashed)) in entries.iter().enumerate() {
        let yy = y + 14.0 * k as f64;
        svg.line(x, yy, x + 18.0, yy, colour, 2.0, dashed.then_some("4,3"));
        svg.text(x + 24.0, yy + 3.0, 10.0, "start", label);
    }
}
