//! Minimal hand-written SVG: axes, polylines, glyphs and filled cells.

use std::fmt::Write;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

pub const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// A single plot panel with linear axes.
pub struct Plot {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

impl Plot {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Self { x: widen(x), y: widen(y), body: String::new() }
    }

    pub fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    pub fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        x.is_finite() && y.is_finite() && x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1
    }

    /// Draws the points as polylines, breaking at gaps and outside the axes.
    pub fn line(&mut self, points: &[Option<(f64, f64)>], class: &str, color: &str, width: f64, dash: Option<&str>) {
        let mut run: Vec<(f64, f64)> = Vec::new();
        let dash = dash.map(|d| format!(" stroke-dasharray=\"{d}\"")).unwrap_or_default();
        let flush = |run: &mut Vec<(f64, f64)>, body: &mut String| {
            if run.len() >= 2 {
                let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
                let _ = writeln!(
                    body,
                    "<polyline class=\"{class}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash} points=\"{}\"/>",
                    pts.join(" ")
                );
            }
            run.clear();
        };
        for p in points {
            match p {
                Some((x, y)) if self.inside(*x, *y) => run.push((self.px(*x), self.py(*y))),
                _ => flush(&mut run, &mut self.body),
            }
        }
        flush(&mut run, &mut self.body);
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, class: &str, color: &str) {
        if self.inside(x, y) {
            let _ = writeln!(
                self.body,
                "<circle class=\"{class}\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"{r}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                self.px(x),
                self.py(y)
            );
        }
    }

    pub fn cross(&mut self, x: f64, y: f64, r: f64, class: &str, color: &str) {
        if self.inside(x, y) {
            let (cx, cy) = (self.px(x), self.py(y));
            let _ = writeln!(
                self.body,
                "<path class=\"{class}\" d=\"M{:.3},{:.3}L{:.3},{:.3}M{:.3},{:.3}L{:.3},{:.3}\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                cx - r,
                cy - r,
                cx + r,
                cy + r,
                cx - r,
                cy + r,
                cx + r,
                cy - r
            );
        }
    }

    pub fn diamond(&mut self, x: f64, y: f64, r: f64, class: &str, color: &str) {
        if self.inside(x, y) {
            let (cx, cy) = (self.px(x), self.py(y));
            let _ = writeln!(
                self.body,
                "<polygon class=\"{class}\" points=\"{:.3},{:.3} {:.3},{:.3} {:.3},{:.3} {:.3},{:.3}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                cx,
                cy - r,
                cx + r,
                cy,
                cx,
                cy + r,
                cx - r,
                cy
            );
        }
    }

    /// Axis-aligned cell spanning `[x0, x1] × [y0, y1]` in data coordinates.
    pub fn cell(&mut self, (x0, x1): (f64, f64), (y0, y1): (f64, f64), class: &str, fill: &str) {
        let (a, b) = (self.px(x0), self.px(x1));
        let (c, d) = (self.py(y1), self.py(y0));
        let _ = writeln!(
            self.body,
            "<rect class=\"{class}\" x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{fill}\"/>",
            a.min(b),
            c.min(d),
            (b - a).abs(),
            (d - c).abs()
        );
    }

    pub fn text(&mut self, x_px: f64, y_px: f64, s: &str) {
        let _ = writeln!(self.body, "<text x=\"{x_px:.1}\" y=\"{y_px:.1}\" font-size=\"12\">{}</text>", escape(s));
    }

    fn axes(&self, x_label: &str, y_label: &str) -> String {
        let mut s = String::new();
        let (x0, x1) = (self.px(self.x.0), self.px(self.x.1));
        let (y0, y1) = (self.py(self.y.0), self.py(self.y.1));
        let _ = writeln!(
            s,
            "<rect class=\"frame\" x=\"{x0:.3}\" y=\"{y1:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" stroke=\"black\"/>",
            x1 - x0,
            y0 - y1
        );
        for i in 0..=5 {
            let t = i as f64 / 5.0;
            let xv = self.x.0 + t * (self.x.1 - self.x.0);
            let yv = self.y.0 + t * (self.y.1 - self.y.0);
            let (xp, yp) = (self.px(xv), self.py(yv));
            let _ = writeln!(s, "<line x1=\"{xp:.3}\" y1=\"{y0:.3}\" x2=\"{xp:.3}\" y2=\"{:.3}\" stroke=\"black\"/>", y0 + 5.0);
            let _ = writeln!(
                s,
                "<text x=\"{xp:.3}\" y=\"{:.3}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
                y0 + 18.0,
                tick(xv)
            );
            let _ = writeln!(s, "<line x1=\"{:.3}\" y1=\"{yp:.3}\" x2=\"{x0:.3}\" y2=\"{yp:.3}\" stroke=\"black\"/>", x0 - 5.0);
            let _ = writeln!(
                s,
                "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
                x0 - 8.0,
                yp + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
            0.5 * (x0 + x1),
            HEIGHT - 10.0,
            escape(x_label)
        );
        let _ = writeln!(
            s,
            "<text x=\"15\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.1})\">{}</text>",
            0.5 * (y0 + y1),
            0.5 * (y0 + y1),
            escape(y_label)
        );
        s
    }

    pub fn render(&self, title: &str, x_label: &str, y_label: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
        );
        let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            WIDTH / 2.0,
            escape(title)
        );
        s.push_str(&self.axes(x_label, y_label));
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() < 1e-2 || v.abs() >= 1e4 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}
