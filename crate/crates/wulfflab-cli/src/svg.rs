//! Minimal self-contained SVG plotting: line/scatter charts with optional
//! log axes, and grid heatmaps.  Text output only; no external renderer.

use wulfflab::graphpde::GridField;

const W: f64 = 640.0;
const H: f64 = 440.0;
const ML: f64 = 70.0; // margins: left, right, top, bottom
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw straight segments between points (otherwise markers only).
    pub line: bool,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if self.log_x && x <= 0.0 || self.log_y && y <= 0.0 {
                    continue;
                }
                let (x, y) = (tx(x), ty(y));
                if x.is_finite() && y.is_finite() {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
        let (mut x0, mut x1) = bounds(&xs);
        let (mut y0, mut y1) = bounds(&ys);
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
        let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
             viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">\n"
        ));
        out.push_str(&format!(
            "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
            W / 2.0,
            esc(&self.title)
        ));
        // Axes frame and ticks.
        out.push_str(&format!(
            "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
            W - ML - MR,
            H - MT - MB
        ));
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let lx = if self.log_x { format!("{:.3e}", 10f64.powf(fx)) } else { format!("{fx:.3}") };
            let ly = if self.log_y { format!("{:.3e}", 10f64.powf(fy)) } else { format!("{fy:.3}") };
            out.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#ccc\"/>\n\
                 <text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\">{4}</text>\n",
                px(fx),
                MT,
                H - MB,
                H - MB + 18.0,
                lx
            ));
            out.push_str(&format!(
                "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#ccc\"/>\n\
                 <text x=\"{2}\" y=\"{3}\" text-anchor=\"end\">{4}</text>\n",
                py(fy),
                W - MR,
                ML - 6.0,
                py(fy) + 4.0,
                ly
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            (ML + W - MR) / 2.0,
            H - 12.0,
            esc(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (MT + H - MB) / 2.0,
            (MT + H - MB) / 2.0,
            esc(&self.y_label)
        ));
        for (si, s) in self.series.iter().enumerate() {
            let color = COLORS[si % COLORS.len()];
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|&&(x, y)| !(self.log_x && x <= 0.0 || self.log_y && y <= 0.0))
                .map(|&(x, y)| (px(tx(x)), py(ty(y))))
                .filter(|&(x, y)| x.is_finite() && y.is_finite())
                .collect();
            if s.line && pts.len() > 1 {
                let path: Vec<String> =
                    pts.iter().map(|&(x, y)| format!("{x:.2},{y:.2}")).collect();
                out.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                    path.join(" ")
                ));
            }
            for &(x, y) in &pts {
                out.push_str(&format!(
                    "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\"/>\n"
                ));
            }
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
                ML + 10.0,
                MT + 16.0 + 16.0 * si as f64,
                esc(&s.label)
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

/// Grid heatmap; NaN cells (outside the domain) are left blank.
pub fn heatmap(field: &GridField, title: &str) -> String {
    let finite: Vec<f64> = field.finite_values().collect();
    let (lo, hi) = bounds(&finite);
    let span = (hi - lo).max(1e-300);
    let cell = ((W - ML - MR) / field.nx as f64).min((H - MT - MB) / field.ny as f64);
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{} \
         [min {:.4}, max {:.4}]</text>\n",
        W / 2.0,
        esc(title),
        lo,
        hi
    ));
    for j in 0..field.ny {
        for i in 0..field.nx {
            let v = field.get(i, j);
            if !v.is_finite() {
                continue;
            }
            let t = (v - lo) / span;
            // Blue (low) through white to red (high).
            let (r, g, b) = if t < 0.5 {
                let u = t * 2.0;
                ((255.0 * u) as u8, (255.0 * u) as u8, 255u8)
            } else {
                let u = (1.0 - t) * 2.0;
                (255u8, (255.0 * u) as u8, (255.0 * u) as u8)
            };
            out.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                 fill=\"rgb({r},{g},{b})\"/>\n",
                ML + i as f64 * cell,
                H - MB - (j + 1) as f64 * cell,
                cell,
                cell
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}
