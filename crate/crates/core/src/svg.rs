//! Minimal self-contained SVG line plots; no external plotting dependency.
//!
//! Plots are conveniences for eyeballing results; CSV/JSON exports are the
//! data contract.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One polyline (or marker set) in data coordinates.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a connected line.
    pub markers: bool,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
        }
    }

    pub fn line(mut self, label: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series { label: label.into(), points, markers: false });
        self
    }

    pub fn markers(mut self, label: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series { label: label.into(), points, markers: true });
        self
    }

    pub fn render(&self) -> String {
        let finite: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .collect();
        let (mut x_lo, mut x_hi) = bounds(finite.iter().map(|p| p.0));
        let (mut y_lo, mut y_hi) = bounds(finite.iter().map(|p| p.1));
        pad(&mut x_lo, &mut x_hi);
        pad(&mut y_lo, &mut y_hi);

        let sx = (WIDTH - 2.0 * MARGIN) / (x_hi - x_lo);
        let sy = (HEIGHT - 2.0 * MARGIN) / (y_hi - y_lo);
        let map = |p: (f64, f64)| {
            (
                MARGIN + (p.0 - x_lo) * sx,
                HEIGHT - MARGIN - (p.1 - y_lo) * sy,
            )
        };

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));
        // frame
        out.push_str(&format!(
            "<rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"#444\"/>\n",
            m = MARGIN,
            w = WIDTH - 2.0 * MARGIN,
            h = HEIGHT - 2.0 * MARGIN
        ));
        // zero axes when in range
        if x_lo < 0.0 && x_hi > 0.0 {
            let (zx, _) = map((0.0, y_lo));
            out.push_str(&format!(
                "<line x1=\"{zx}\" y1=\"{m}\" x2=\"{zx}\" y2=\"{b}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n",
                m = MARGIN,
                b = HEIGHT - MARGIN
            ));
        }
        if y_lo < 0.0 && y_hi > 0.0 {
            let (_, zy) = map((x_lo, 0.0));
            out.push_str(&format!(
                "<line x1=\"{m}\" y1=\"{zy}\" x2=\"{r}\" y2=\"{zy}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n",
                m = MARGIN,
                r = WIDTH - MARGIN
            ));
        }
        // axis range labels
        for (txt, x, y, anchor) in [
            (fmt_num(x_lo), MARGIN, HEIGHT - MARGIN + 18.0, "middle"),
            (fmt_num(x_hi), WIDTH - MARGIN, HEIGHT - MARGIN + 18.0, "middle"),
            (fmt_num(y_lo), MARGIN - 6.0, HEIGHT - MARGIN, "end"),
            (fmt_num(y_hi), MARGIN - 6.0, MARGIN + 4.0, "end"),
        ] {
            out.push_str(&format!(
                "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{txt}</text>\n"
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        ));

        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            if s.markers {
                for &p in &s.points {
                    if !p.0.is_finite() || !p.1.is_finite() {
                        continue;
                    }
                    let (px, py) = map(p);
                    out.push_str(&format!(
                        "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3.5\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
                    ));
                }
            } else {
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .filter(|p| p.0.is_finite() && p.1.is_finite())
                    .map(|&p| {
                        let (px, py) = map(p);
                        format!("{px:.2},{py:.2}")
                    })
                    .collect();
                out.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>\n",
                    pts.join(" ")
                ));
            }
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
                MARGIN + 8.0,
                MARGIN + 16.0 + 14.0 * i as f64,
                escape(&s.label)
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn pad(lo: &mut f64, hi: &mut f64) {
    if *hi - *lo < 1e-12 {
        *lo -= 0.5;
        *hi += 0.5;
    } else {
        let m = 0.05 * (*hi - *lo);
        *lo -= m;
        *hi += m;
    }
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
