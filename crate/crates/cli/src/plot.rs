//! Box-ellipse plot: bootstrap cloud, joint confidence ellipses, CI box.

use std::fmt::Write;

use mcjoint::dataset::round_significant;
use mcjoint::jetest::ValidationReport;
use mcjoint::robustcov::{EllipseGeometry, Point};

/// Largest number of drawn replicate marks.
pub const MAX_MARKS: usize = 5000;

const SIZE: f64 = 640.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const ELLIPSE_VERTICES: usize = 180;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPayload {
    /// `(intercept, slope)` replicates.
    pub points: Vec<Point>,
    pub ellipse05: EllipseGeometry,
    pub ellipse01: EllipseGeometry,
    /// `[int_lo, int_hi, slope_lo, slope_hi]`.
    pub rect: [f64; 4],
    pub h0: Point,
    pub center: Point,
    pub x_label: String,
    pub y_label: String,
    pub title: String,
}

impl PlotPayload {
    pub fn from_report(r: &ValidationReport, points: &[Point]) -> Self {
        let iv = &r.intervals;
        Self {
            points: points.to_vec(),
            ellipse05: r.ellipse05,
            ellipse01: r.ellipse01,
            rect: [iv.int_lo, iv.int_hi, iv.slope_lo, iv.slope_hi],
            h0: r.h0,
            center: r.cov.center,
            x_label: "intercept".into(),
            y_label: "slope".into(),
            title: format!(
                "{} {} / {}: CI {}, JE {} (p = {})",
                r.label,
                r.fit.method.name(),
                r.cov.estimator.name(),
                r.verdict_ci,
                r.verdict_je,
                num(r.je_pvalue)
            ),
        }
    }
}

/// Number with the 6 significant digits used in the JSON report.
pub fn num(v: f64) -> String {
    format!("{}", round_significant(v, 6))
}

fn ellipse_extent(e: &EllipseGeometry) -> [f64; 2] {
    let (s, c) = e.rotation.sin_cos();
    let [a, b] = e.semi_axes;
    [
        (a * a * c * c + b * b * s * s).sqrt(),
        (a * a * s * s + b * b * c * c).sqrt(),
    ]
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, p: Point) -> (f64, f64) {
        let w = SIZE - LEFT - RIGHT;
        let h = SIZE - TOP - BOTTOM;
        (
            LEFT + (p[0] - self.x0) / (self.x1 - self.x0) * w,
            TOP + (self.y1 - p[1]) / (self.y1 - self.y0) * h,
        )
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let pad = if span > 0.0 {
        0.1 * span
    } else {
        1e-3 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

fn frame(p: &PlotPayload) -> Frame {
    let mut xs = vec![p.rect[0], p.rect[1], p.h0[0], p.center[0]];
    let mut ys = vec![p.rect[2], p.rect[3], p.h0[1], p.center[1]];
    for e in [&p.ellipse05, &p.ellipse01] {
        let [dx, dy] = ellipse_extent(e);
        xs.extend([e.center[0] - dx, e.center[0] + dx]);
        ys.extend([e.center[1] - dy, e.center[1] + dy]);
    }
    xs.extend(p.points.iter().map(|q| q[0]));
    ys.extend(p.points.iter().map(|q| q[1]));
    let bounds = |v: &[f64]| {
        v.iter()
            .filter(|x| x.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    };
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    Frame { x0, x1, y0, y1 }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * step {
        out.push(round_significant(t, 6));
        t += step;
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn ellipse_path(f: &Frame, e: &EllipseGeometry) -> String {
    let mut d = String::new();
    for k in 0..ELLIPSE_VERTICES {
        let t = k as f64 / ELLIPSE_VERTICES as f64 * std::f64::consts::TAU;
        let (x, y) = f.px(e.boundary_point(t));
        let _ = write!(d, "{}{x:.2},{y:.2}", if k == 0 { "M" } else { " L" });
    }
    d.push_str(" Z");
    d
}

fn ellipse_element(f: &Frame, e: &EllipseGeometry, id: &str, style: &str) -> String {
    format!(
        "<path id=\"{id}\" data-center-x=\"{}\" data-center-y=\"{}\" data-semi-major=\"{}\" data-semi-minor=\"{}\" data-rotation=\"{}\" data-level=\"{}\" d=\"{}\" {style}/>\n",
        num(e.center[0]),
        num(e.center[1]),
        num(e.semi_axes[0]),
        num(e.semi_axes[1]),
        num(e.rotation),
        num(e.level),
        ellipse_path(f, e)
    )
}

/// Renders the payload as a standalone SVG document. Deterministic: the
/// same payload always yields the same bytes.
pub fn render_box_ellipse(p: &PlotPayload) -> String {
    let f = frame(p);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(s, "<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\">{}</text>",
        SIZE / 2.0,
        escape(&p.title)
    );

    // axes
    let (ax0, ay0) = f.px([f.x0, f.y0]);
    let (ax1, ay1) = f.px([f.x1, f.y1]);
    let _ = writeln!(
        s,
        "<rect x=\"{ax0:.2}\" y=\"{ay1:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
        ax1 - ax0,
        ay0 - ay1
    );
    for t in ticks(f.x0, f.x1) {
        let (x, _) = f.px([t, f.y0]);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{ay0:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            ay0 + 5.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t}</text>",
            ay0 + 18.0
        );
    }
    for t in ticks(f.y0, f.y1) {
        let (_, y) = f.px([f.x0, t]);
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{ax0:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>",
            ax0 - 5.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{t}</text>",
            ax0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        (ax0 + ax1) / 2.0,
        SIZE - 15.0,
        escape(&p.x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"15\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.2})\">{}</text>",
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0,
        escape(&p.y_label)
    );

    // replicate cloud, thinned by a fixed stride
    let stride = p.points.len().div_ceil(MAX_MARKS).max(1);
    let _ = writeln!(s, "<g id=\"replicates\" fill=\"#4a78b5\" fill-opacity=\"0.35\">");
    for q in p.points.iter().step_by(stride) {
        let (x, y) = f.px(*q);
        let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.2\"/>");
    }
    s.push_str("</g>\n");

    let [il, ih, sl, sh] = p.rect;
    let (rx0, ry0) = f.px([il, sh]);
    let (rx1, ry1) = f.px([ih, sl]);
    let _ = writeln!(
        s,
        "<rect id=\"ci-box\" data-int-lo=\"{}\" data-int-hi=\"{}\" data-slope-lo=\"{}\" data-slope-hi=\"{}\" x=\"{rx0:.2}\" y=\"{ry0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#2a9d3f\" stroke-width=\"1.5\"/>",
        num(il),
        num(ih),
        num(sl),
        num(sh),
        rx1 - rx0,
        ry1 - ry0
    );
    s.push_str(&ellipse_element(
        &f,
        &p.ellipse05,
        "ellipse05",
        "fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\"",
    ));
    s.push_str(&ellipse_element(
        &f,
        &p.ellipse01,
        "ellipse01",
        "fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"",
    ));

    let (cx, cy) = f.px(p.center);
    let _ = writeln!(
        s,
        "<circle id=\"center\" data-x=\"{}\" data-y=\"{}\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3.5\" fill=\"black\"/>",
        num(p.center[0]),
        num(p.center[1])
    );
    let (hx, hy) = f.px(p.h0);
    let _ = writeln!(
        s,
        "<path id=\"h0\" data-x=\"{}\" data-y=\"{}\" d=\"M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}\" stroke=\"black\" stroke-width=\"2\"/>",
        num(p.h0[0]),
        num(p.h0[1]),
        hx - 6.0,
        hy - 6.0,
        hx + 6.0,
        hy + 6.0,
        hx - 6.0,
        hy + 6.0,
        hx + 6.0,
        hy - 6.0
    );

    // legend
    let lx = ax1 - 150.0;
    let ly = ay1 + 10.0;
    let _ = writeln!(
        s,
        "<g id=\"legend\"><rect x=\"{lx:.2}\" y=\"{ly:.2}\" width=\"145\" height=\"82\" fill=\"white\" fill-opacity=\"0.85\" stroke=\"#999\"/>"
    );
    let rows: [(&str, &str); 5] = [
        ("stroke=\"#c0392b\"", "JE ellipse 5%"),
        ("stroke=\"#c0392b\" stroke-dasharray=\"6 4\"", "JE ellipse 1%"),
        ("stroke=\"#2a9d3f\"", "CI box"),
        ("stroke=\"black\"", "H0 (0, 1)"),
        ("stroke=\"#4a78b5\"", "bootstrap replicates"),
    ];
    for (k, (style, label)) in rows.iter().enumerate() {
        let y = ly + 14.0 + 15.0 * k as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" {style} stroke-width=\"1.5\"/><text x=\"{:.2}\" y=\"{:.2}\">{label}</text>",
            lx + 6.0,
            lx + 28.0,
            lx + 34.0,
            y + 4.0
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}
