//! Minimal SVG plotting (lines, confidence bands, bars) for report output.
//! No external tooling; everything renders to a plain SVG string.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

/// Shaded ribbon between two point sequences (confidence interval).
#[derive(Debug, Clone)]
pub struct Band {
    pub color: String,
    pub lower: Vec<(f64, f64)>,
    pub upper: Vec<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_B - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let (px0, px1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (py0, py1) = (HEIGHT - MARGIN_B, MARGIN_T);
    writeln!(
        out,
        "<line x1=\"{px0}\" y1=\"{py0}\" x2=\"{px1}\" y2=\"{py0}\" stroke=\"black\"/>\n\
         <line x1=\"{px0}\" y1=\"{py0}\" x2=\"{px0}\" y2=\"{py1}\" stroke=\"black\"/>"
    )
    .unwrap();
    for i in 0..=5 {
        let fx = frame.x0 + (frame.x1 - frame.x0) * i as f64 / 5.0;
        let fy = frame.y0 + (frame.y1 - frame.y0) * i as f64 / 5.0;
        let sx = frame.x(fx);
        let sy = frame.y(fy);
        writeln!(
            out,
            "<line x1=\"{sx}\" y1=\"{py0}\" x2=\"{sx}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{sx}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            py0 + 5.0,
            py0 + 18.0,
            trim_num(fx)
        )
        .unwrap();
        writeln!(
            out,
            "<line x1=\"{}\" y1=\"{sy}\" x2=\"{px0}\" y2=\"{sy}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            px0 - 5.0,
            px0 - 8.0,
            sy + 4.0,
            trim_num(fy)
        )
        .unwrap();
    }
    writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
        (px0 + px1) / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 {})\">{}</text>",
        (py0 + py1) / 2.0,
        (py0 + py1) / 2.0,
        escape(y_label)
    )
    .unwrap();
}

fn trim_num(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

/// Line plot with optional confidence bands. Ranges are derived from the
/// data unless overridden.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    bands: &[Band],
    y_range: Option<(f64, f64)>,
) -> String {
    let all_pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .chain(bands.iter().flat_map(|b| b.lower.iter().chain(b.upper.iter())));
    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for &(x, y) in all_pts {
        if x.is_finite() && y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if let Some((lo, hi)) = y_range {
        (y0, y1) = (lo, hi);
    }
    if (x1 - x0).abs() < 1e-12 {
        x1 = x0 + 1.0;
    }
    if (y1 - y0).abs() < 1e-12 {
        y1 = y0 + 1.0;
    }
    let frame = Frame { x0, x1, y0, y1 };

    let mut out = header(title);
    for band in bands {
        let mut path: Vec<String> = band
            .upper
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
            .collect();
        path.extend(
            band.lower
                .iter()
                .rev()
                .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y))),
        );
        writeln!(
            out,
            "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.3\" stroke=\"none\"/>",
            path.join(" "),
            band.color
        )
        .unwrap();
    }
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
            .collect();
        writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            pts.join(" "),
            s.color
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>",
            WIDTH - MARGIN_R - 140.0,
            MARGIN_T + 16.0 * (i as f64 + 1.0),
            s.color,
            escape(&s.label)
        )
        .unwrap();
    }
    axes(&mut out, &frame, x_label, y_label);
    out.push_str("</svg>\n");
    out
}

/// Vertical bar chart with optional error whiskers.
pub fn bar_chart(
    title: &str,
    y_label: &str,
    bars: &[(String, f64, Option<f64>)],
    color: &str,
) -> String {
    let y_max = bars
        .iter()
        .map(|(_, v, e)| v + e.unwrap_or(0.0))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let frame = Frame { x0: 0.0, x1: bars.len() as f64, y0: 0.0, y1: y_max * 1.1 };

    let mut out = header(title);
    let slot = (WIDTH - MARGIN_L - MARGIN_R) / bars.len().max(1) as f64;
    for (i, (label, value, err)) in bars.iter().enumerate() {
        let cx = MARGIN_L + slot * (i as f64 + 0.5);
        let bw = slot * 0.6;
        let top = frame.y(*value);
        let base = frame.y(0.0);
        writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{top:.2}\" width=\"{bw:.2}\" height=\"{:.2}\" fill=\"{color}\"/>",
            cx - bw / 2.0,
            base - top
        )
        .unwrap();
        if let Some(e) = err {
            let y_lo = frame.y((value - e).max(0.0));
            let y_hi = frame.y(value + e);
            writeln!(
                out,
                "<line x1=\"{cx:.2}\" y1=\"{y_lo:.2}\" x2=\"{cx:.2}\" y2=\"{y_hi:.2}\" stroke=\"black\"/>"
            )
            .unwrap();
        }
        writeln!(
            out,
            "<text x=\"{cx:.2}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            HEIGHT - MARGIN_B + 18.0,
            escape(label)
        )
        .unwrap();
    }
    // y axis only (categorical x)
    let (px0, py0, py1) = (MARGIN_L, HEIGHT - MARGIN_B, MARGIN_T);
    writeln!(out, "<line x1=\"{px0}\" y1=\"{py0}\" x2=\"{px0}\" y2=\"{py1}\" stroke=\"black\"/>").unwrap();
    writeln!(out, "<line x1=\"{px0}\" y1=\"{py0}\" x2=\"{}\" y2=\"{py0}\" stroke=\"black\"/>", WIDTH - MARGIN_R).unwrap();
    for i in 0..=5 {
        let fy = frame.y1 * i as f64 / 5.0;
        let sy = frame.y(fy);
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            px0 - 8.0,
            sy + 4.0,
            trim_num(fy)
        )
        .unwrap();
    }
    writeln!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 {})\">{}</text>",
        (py0 + py1) / 2.0,
        (py0 + py1) / 2.0,
        escape(y_label)
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

/// Render the right-lung probability curve with its confidence band.
pub fn right_lung_curve_svg(curve: &crate::analytics::RightLungCurve) -> String {
    let pts: Vec<(f64, f64)> = curve
        .bins
        .iter()
        .filter(|b| b.p.is_finite())
        .map(|b| (b.bin as f64 / 100.0, b.p))
        .collect();
    let lower: Vec<(f64, f64)> = curve
        .bins
        .iter()
        .filter(|b| b.p.is_finite())
        .map(|b| (b.bin as f64 / 100.0, b.ci_lo))
        .collect();
    let upper: Vec<(f64, f64)> = curve
        .bins
        .iter()
        .filter(|b| b.p.is_finite())
        .map(|b| (b.bin as f64 / 100.0, b.ci_hi))
        .collect();
    line_plot(
        "Right-lung gaze probability",
        "normalized reading time",
        "P(right lung)",
        &[Series { label: "P(right)".into(), color: "#7b68ee".into(), points: pts }],
        &[Band { color: "#7b68ee".into(), lower, upper }],
        Some((0.0, 1.0)),
    )
}
