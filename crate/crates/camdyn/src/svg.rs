//! Minimal SVG scatter rendering for diagram files: points, axes, ticks
//! and dotted vertical rules at marked abscissae.

/// A scatter plot description.
pub struct ScatterPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    /// Dotted vertical rules (corner phases, bifurcation speeds, ...).
    pub vertical_rules: Vec<f64>,
}

const W: f64 = 860.0;
const H: f64 = 600.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

impl ScatterPlot {
    pub fn render(&self) -> String {
        let (mut x0, mut x1) = bounds(self.points.iter().map(|p| p.0));
        let (mut y0, mut y1) = bounds(self.points.iter().map(|p| p.1));
        for r in &self.vertical_rules {
            if r.is_finite() {
                x0 = x0.min(*r);
                x1 = x1.max(*r);
            }
        }
        if !(x1 > x0) {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if !(y1 > y0) {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad_x = 0.03 * (x1 - x0);
        let pad_y = 0.05 * (y1 - y0);
        x0 -= pad_x;
        x1 += pad_x;
        y0 -= pad_y;
        y1 += pad_y;
        let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (W - MARGIN_L - MARGIN_R);
        let sy = |y: f64| H - MARGIN_B - (y - y0) / (y1 - y0) * (H - MARGIN_T - MARGIN_B);

        let mut s = String::new();
        s.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
        ));
        s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        s.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
            W / 2.0,
            xml_escape(&self.title)
        ));
        // frame
        s.push_str(&format!(
            "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
            W - MARGIN_L - MARGIN_R,
            H - MARGIN_T - MARGIN_B
        ));
        // ticks
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            s.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
                sx(fx),
                H - MARGIN_B,
                H - MARGIN_B + 5.0
            ));
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{:.5}</text>\n",
                sx(fx),
                H - MARGIN_B + 18.0,
                fx
            ));
            s.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n",
                MARGIN_L - 5.0,
                sy(fy),
                MARGIN_L
            ));
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{:.5}</text>\n",
                MARGIN_L - 8.0,
                sy(fy) + 4.0,
                fy
            ));
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
            W / 2.0,
            H - 12.0,
            xml_escape(&self.x_label)
        ));
        s.push_str(&format!(
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            H / 2.0,
            H / 2.0,
            xml_escape(&self.y_label)
        ));
        // dotted rules mark the phases where the cam profile loses smoothness
        for r in &self.vertical_rules {
            if *r < x0 || *r > x1 {
                continue;
            }
            s.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{MARGIN_T}\" x2=\"{0}\" y2=\"{1}\" stroke=\"gray\" stroke-dasharray=\"3 4\"/>\n",
                sx(*r),
                H - MARGIN_B
            ));
        }
        for (x, y) in &self.points {
            if !x.is_finite() || !y.is_finite() {
                continue;
            }
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.4\" fill=\"black\"/>\n",
                sx(*x),
                sy(*y)
            ));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in vals {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
