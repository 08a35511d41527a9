//! Static SVG scatter plots for frontier summaries: fairness gap on the
//! horizontal axis, AUC on the vertical, one marker per budget, error bars
//! whenever a standard error is positive. The output is a single
//! self-contained XML document with no external references.

use anyhow::{bail, Result};

/// One aggregated frontier point.
#[derive(Debug, Clone)]
pub struct PlotPoint {
    /// Horizontal value (mean fairness gap).
    pub x: f64,
    /// Vertical value (mean AUC).
    pub y: f64,
    /// Standard errors; a bar is drawn only when positive.
    pub x_err: f64,
    pub y_err: f64,
    /// Marker annotation, e.g. `kappa=0.1`.
    pub tag: String,
}

/// A named series of frontier points (one per method).
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<PlotPoint>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 54.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Expands a data interval by 5% on each side; degenerate intervals get an
/// absolute cushion so a single point still renders away from the frame.
fn axis_range(min: f64, max: f64) -> (f64, f64) {
    let span = max - min;
    if span > 0.0 {
        (min - 0.05 * span, max + 0.05 * span)
    } else {
        let pad = (0.05 * min.abs()).max(0.01);
        (min - pad, max + pad)
    }
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

/// Renders the scatter. Fails only on empty input (nothing to scale the axes
/// by).
pub fn emit_plot(series: &[PlotSeries]) -> Result<String> {
    let points: Vec<&PlotPoint> = series.iter().flat_map(|s| s.points.iter()).collect();
    if points.is_empty() {
        bail!("plot: at least one frontier point is required");
    }

    // Error bars count toward the data extent so they always fit the frame.
    let x_min = points.iter().map(|p| p.x - p.x_err).fold(f64::INFINITY, f64::min);
    let x_max = points.iter().map(|p| p.x + p.x_err).fold(f64::NEG_INFINITY, f64::max);
    let y_min = points.iter().map(|p| p.y - p.y_err).fold(f64::INFINITY, f64::min);
    let y_max = points.iter().map(|p| p.y + p.y_err).fold(f64::NEG_INFINITY, f64::max);
    let (x_lo, x_hi) = axis_range(x_min, x_max);
    let (y_lo, y_hi) = axis_range(y_min, y_max);

    let inner_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let inner_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_px = |x: f64, y: f64| {
        (
            MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * inner_w,
            MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * inner_h,
        )
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{inner_w}\" height=\"{inner_h}\" \
         fill=\"none\" stroke=\"#333333\"/>\n"
    ));

    // Five evenly spaced numeric ticks per axis.
    for i in 0..5 {
        let t = i as f64 / 4.0;
        let x_val = x_lo + t * (x_hi - x_lo);
        let y_val = y_lo + t * (y_hi - y_lo);
        let (px, _) = to_px(x_val, y_lo);
        let (_, py) = to_px(x_lo, y_val);
        svg.push_str(&format!(
            "  <line x1=\"{px:.2}\" y1=\"{0}\" x2=\"{px:.2}\" y2=\"{1}\" stroke=\"#333333\"/>\n",
            MARGIN_TOP + inner_h,
            MARGIN_TOP + inner_h + 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\">{x_val:.3}</text>\n",
            MARGIN_TOP + inner_h + 18.0
        ));
        svg.push_str(&format!(
            "  <line x1=\"{0}\" y1=\"{py:.2}\" x2=\"{1}\" y2=\"{py:.2}\" stroke=\"#333333\"/>\n",
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{y_val:.3}</text>\n",
            MARGIN_LEFT - 8.0,
            py + 4.0
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">fairness gap</text>\n",
        MARGIN_LEFT + inner_w / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "  <text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">AUC</text>\n",
        MARGIN_TOP + inner_h / 2.0,
        MARGIN_TOP + inner_h / 2.0
    ));

    for (s_idx, s) in series.iter().enumerate() {
        let color = PALETTE[s_idx % PALETTE.len()];
        for p in &s.points {
            let (cx, cy) = to_px(p.x, p.y);
            if p.x_err > 0.0 {
                let (x1, _) = to_px(p.x - p.x_err, p.y);
                let (x2, _) = to_px(p.x + p.x_err, p.y);
                svg.push_str(&format!(
                    "  <line class=\"errbar\" x1=\"{x1:.2}\" y1=\"{cy:.2}\" x2=\"{x2:.2}\" \
                     y2=\"{cy:.2}\" stroke=\"{color}\"/>\n"
                ));
            }
            if p.y_err > 0.0 {
                let (_, y1) = to_px(p.x, p.y - p.y_err);
                let (_, y2) = to_px(p.x, p.y + p.y_err);
                svg.push_str(&format!(
                    "  <line class=\"errbar\" x1=\"{cx:.2}\" y1=\"{y1:.2}\" x2=\"{cx:.2}\" \
                     y2=\"{y2:.2}\" stroke=\"{color}\"/>\n"
                ));
            }
            svg.push_str(&format!(
                "  <circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"{color}\">\
                 <title>{}</title></circle>\n",
                escape_xml(&p.tag)
            ));
        }
        // Legend entry, stacked top-right inside the frame.
        let ly = MARGIN_TOP + 16.0 + 16.0 * s_idx as f64;
        svg.push_str(&format!(
            "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            MARGIN_LEFT + inner_w - 110.0,
            ly - 9.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{ly:.2}\">{}</text>\n",
            MARGIN_LEFT + inner_w - 96.0,
            escape_xml(&s.label)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
