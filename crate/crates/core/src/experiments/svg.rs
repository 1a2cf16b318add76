//! Minimal SVG line and box plots.

use std::fmt::Write;

use serde::Serialize;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxGroup {
    pub label: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Plot {
    Lines {
        name: String,
        title: String,
        x_label: String,
        y_label: String,
        series: Vec<Series>,
        /// Equal scaling on both axes, for curves in the plane.
        equal_aspect: bool,
    },
    Boxes {
        name: String,
        title: String,
        y_label: String,
        groups: Vec<BoxGroup>,
    },
}

impl Plot {
    pub fn name(&self) -> &str {
        match self {
            Plot::Lines { name, .. } | Plot::Boxes { name, .. } => name,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Plot::Lines {
                title,
                x_label,
                y_label,
                series,
                equal_aspect,
                ..
            } => render_lines(title, x_label, y_label, series, *equal_aspect),
            Plot::Boxes {
                title, y_label, groups, ..
            } => render_boxes(title, y_label, groups),
        }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (WIDTH - MARGIN_R + MARGIN_L) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: Option<&str>, y_label: &str) {
    let (l, r) = (MARGIN_L, WIDTH - MARGIN_R);
    let (t, b) = (MARGIN_T, HEIGHT - MARGIN_B);
    let _ = writeln!(
        out,
        r##"<rect x="{l}" y="{t}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
        r - l,
        b - t
    );
    for i in 0..=4 {
        let v = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let y = f.py(v);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{l}" y2="{y:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            l - 4.0,
            l - 6.0,
            y + 4.0,
            tick(v)
        );
    }
    if let Some(xl) = x_label {
        for i in 0..=4 {
            let v = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
            let x = f.px(v);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.1}" y1="{b}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                b + 4.0,
                b + 17.0,
                tick(v)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (l + r) / 2.0,
            HEIGHT - 8.0,
            escape(xl)
        );
    }
    let _ = writeln!(
        out,
        r#"<text transform="translate(16,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-2 && v.abs() < 1e4) {
        format!("{v:.2}")
    } else {
        format!("{v:.1e}")
    }
}

fn render_lines(title: &str, x_label: &str, y_label: &str, series: &[Series], equal_aspect: bool) -> String {
    let xs = series.iter().flat_map(|s| s.x.iter().copied()).filter(|v| v.is_finite());
    let ys = series.iter().flat_map(|s| s.y.iter().copied()).filter(|v| v.is_finite());
    let (mut x0, mut x1) = padded(xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let (mut y0, mut y1) = padded(ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
    if equal_aspect {
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let per_px = ((x1 - x0) / pw).max((y1 - y0) / ph);
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        x0 = cx - per_px * pw / 2.0;
        x1 = cx + per_px * pw / 2.0;
        y0 = cy - per_px * ph / 2.0;
        y1 = cy + per_px * ph / 2.0;
    }
    let f = Frame { x0, x1, y0, y1 };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, Some(x_label), y_label);
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for (&x, &y) in s.x.iter().zip(&s.y) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", f.px(x), f.py(y));
            }
        }
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.6"{dash}/>"#,
            pts.trim_end()
        );
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_R + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn render_boxes(title: &str, y_label: &str, groups: &[BoxGroup]) -> String {
    let lo = groups.iter().map(|g| g.min).fold(f64::INFINITY, f64::min);
    let hi = groups.iter().map(|g| g.max).fold(f64::NEG_INFINITY, f64::max);
    let (y0, y1) = padded(lo, hi);
    let f = Frame {
        x0: 0.0,
        x1: groups.len().max(1) as f64,
        y0,
        y1,
    };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, None, y_label);
    let slot = (WIDTH - MARGIN_L - MARGIN_R) / groups.len().max(1) as f64;
    let bw = (slot * 0.5).min(60.0);
    for (i, g) in groups.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let cx = f.px(i as f64 + 0.5);
        let (ymin, yq1, ymed, yq3, ymax) = (f.py(g.min), f.py(g.q1), f.py(g.median), f.py(g.q3), f.py(g.max));
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.1}" y1="{ymin:.1}" x2="{cx:.1}" y2="{yq1:.1}" stroke="{colour}"/><line x1="{cx:.1}" y1="{yq3:.1}" x2="{cx:.1}" y2="{ymax:.1}" stroke="{colour}"/>"#
        );
        for y in [ymin, ymax] {
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{colour}"/>"#,
                cx - bw / 4.0,
                cx + bw / 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{yq3:.1}" width="{bw:.1}" height="{:.1}" fill="{colour}" fill-opacity="0.25" stroke="{colour}"/>"#,
            cx - bw / 2.0,
            (yq1 - yq3).max(0.5)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{ymed:.1}" x2="{:.1}" y2="{ymed:.1}" stroke="{colour}" stroke-width="2.5"/>"#,
            cx - bw / 2.0,
            cx + bw / 2.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN_B + 17.0,
            escape(&g.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_well_formed() {
        let p = Plot::Lines {
            name: "t".into(),
            title: "a < b & c".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![
                Series {
                    label: "one".into(),
                    x: vec![0.0, 1.0, 2.0],
                    y: vec![1.0, f64::NAN, 3.0],
                    dashed: false,
                },
                Series {
                    label: "flat".into(),
                    x: vec![0.0, 2.0],
                    y: vec![2.0, 2.0],
                    dashed: true,
                },
            ],
            equal_aspect: true,
        };
        let s = p.render();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("a &lt; b &amp; c"));
        assert!(!s.contains("NaN"));
        assert_eq!(s, p.render());
    }

    #[test]
    fn box_plot_has_one_box_per_group() {
        let g = |label: &str| BoxGroup {
            label: label.into(),
            min: 0.0,
            q1: 1.0,
            median: 2.0,
            q3: 3.0,
            max: 4.0,
        };
        let p = Plot::Boxes {
            name: "b".into(),
            title: "t".into(),
            y_label: "err".into(),
            groups: vec![g("shallow"), g("bottleneck")],
        };
        let s = p.render();
        assert_eq!(s.matches("<rect").count(), 2 + 2);
        assert!(s.contains("bottleneck"));
    }
}
