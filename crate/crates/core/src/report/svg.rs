//! Hand-written SVG 1.1 charts. Each plotting panel is a `<g>` carrying its data
//! window in `data-*` attributes so the drawn coordinates can be mapped back to
//! data values.

use std::fmt::Write as _;

use super::format::format_num;
use crate::boost::ImportanceRanking;
use crate::data::{Setting, TreatmentSeries};
use crate::featurize::forward_difference;

const WIDTH: f64 = 640.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const PANEL_HEIGHT: f64 = 150.0;
const PANEL_GAP: f64 = 70.0;
const TOP: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let half = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - half, hi + half)
    }
}

/// Mapping from data coordinates to panel-local pixels.
struct Frame {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        (v - self.xmin) / (self.xmax - self.xmin) * self.width
    }

    fn y(&self, v: f64) -> f64 {
        self.height - (v - self.ymin) / (self.ymax - self.ymin) * self.height
    }

    fn open(&self, svg: &mut String, class: &str, dx: f64, dy: f64) {
        let _ = writeln!(
            svg,
            r#"<g class="{class}" transform="translate({dx},{dy})" data-xmin="{}" data-xmax="{}" data-ymin="{}" data-ymax="{}" data-width="{}" data-height="{}">"#,
            self.xmin, self.xmax, self.ymin, self.ymax, self.width, self.height
        );
        let _ = writeln!(
            svg,
            r##"<rect x="0" y="0" width="{}" height="{}" fill="none" stroke="#999"/>"##,
            self.width, self.height
        );
    }

    fn y_ticks(&self, svg: &mut String) {
        for v in nice_ticks(self.ymin, self.ymax) {
            let y = self.y(v);
            let _ = writeln!(svg, r##"<line x1="-4" y1="{y:.2}" x2="0" y2="{y:.2}" stroke="#333"/>"##);
            let _ = writeln!(
                svg,
                r#"<text x="-8" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#,
                y + 3.0,
                format_num(v)
            );
        }
    }

    fn x_ticks(&self, svg: &mut String) {
        for v in nice_ticks(self.xmin, self.xmax) {
            let x = self.x(v);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{h}" x2="{x:.2}" y2="{}" stroke="#333"/>"##,
                self.height + 4.0,
                h = self.height
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
                self.height + 16.0,
                format_num(v)
            );
        }
    }
}

/// Round tick positions (steps of 1, 2 or 5 times a power of ten) inside [lo, hi].
fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 4.0;
    if !(raw > 0.0 && raw.is_finite()) {
        return vec![lo];
    }
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| round_sig(i as f64 * step, 12)).collect()
}

fn round_sig(v: f64, sig: i32) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let scale = 10f64.powi(sig - 1 - v.abs().log10().floor() as i32);
    (v * scale).round() / scale
}

fn line(svg: &mut String, frame: &Frame, xs: &[f64], ys: &[f64], color: &str) {
    let points: Vec<String> =
        xs.iter().zip(ys).map(|(&x, &y)| format!("{:.4},{:.4}", frame.x(x), frame.y(y))).collect();
    let _ = writeln!(
        svg,
        r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        points.join(" ")
    );
    for (&x, &y) in xs.iter().zip(ys) {
        let _ = writeln!(svg, r#"<circle cx="{:.4}" cy="{:.4}" r="2.5" fill="{color}"/>"#, frame.x(x), frame.y(y));
    }
}

/// Time-series chart of one treatment setting: raw values in red on top, and the
/// forward differences in blue below (plotted at the later visit's day). The
/// differenced panel is left out for single-treatment series.
pub fn plot_series(series: &TreatmentSeries, setting: Setting) -> String {
    let days: Vec<f64> = series.days().iter().map(|&d| f64::from(d)).collect();
    let values = series.values(setting);
    let diffs = forward_difference(&values).ok();
    let panels = if diffs.is_some() { 2.0 } else { 1.0 };
    let height = TOP + panels * (PANEL_HEIGHT + PANEL_GAP);
    let (xmin, xmax) = padded_range(days.iter().copied());
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let title = format!("{}: {}", series.tattoo_id(), setting.label());
    let _ = writeln!(svg, "<title>{}</title>", escape(&title));
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&title)
    );

    let (ymin, ymax) = padded_range(values.iter().copied());
    let raw = Frame { xmin, xmax, ymin, ymax, width: plot_w, height: PANEL_HEIGHT };
    raw.open(&mut svg, "panel raw", MARGIN_LEFT, TOP);
    raw.y_ticks(&mut svg);
    raw.x_ticks(&mut svg);
    line(&mut svg, &raw, &days, &values, "red");
    let _ = writeln!(svg, "</g>");

    if let Some(d) = diffs {
        let (ymin, ymax) = padded_range(d.iter().copied());
        let frame = Frame { xmin, xmax, ymin, ymax, width: plot_w, height: PANEL_HEIGHT };
        let dy = TOP + PANEL_HEIGHT + PANEL_GAP;
        frame.open(&mut svg, "panel diff", MARGIN_LEFT, dy);
        frame.y_ticks(&mut svg);
        frame.x_ticks(&mut svg);
        if ymin < 0.0 && ymax > 0.0 {
            let y0 = frame.y(0.0);
            let _ = writeln!(
                svg,
                r##"<line x1="0" y1="{y0:.2}" x2="{plot_w}" y2="{y0:.2}" stroke="#bbb" stroke-dasharray="3,3"/>"##
            );
        }
        line(&mut svg, &frame, &days[1..], &d, "blue");
        let _ = writeln!(svg, "</g>");
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.0}" font-size="11" text-anchor="middle">Differenced {}</text>"#,
            WIDTH / 2.0,
            dy - 8.0,
            escape(setting.label())
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{:.0}" font-size="11" text-anchor="middle">Days since first treatment</text>"#,
        WIDTH / 2.0,
        height - 12.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// One bar chart per feature of how often it received each importance rank; the
/// bar at the feature's total rank is hatched. `only` restricts and orders the
/// panels by feature index; `None` draws every feature in total-rank order.
pub fn plot_rank_histograms(ranking: &ImportanceRanking, only: Option<&[usize]>) -> String {
    let order = only.map_or_else(|| ranking.ordered(), <[usize]>::to_vec);
    let n_ranks = ranking.features.len();
    let cols = 2usize.min(order.len().max(1));
    let rows = order.len().div_ceil(cols).max(1);
    let (pw, ph) = (260.0, 140.0);
    let (cell_w, cell_h) = (pw + 70.0, ph + 70.0);
    let width = cols as f64 * cell_w + 20.0;
    let height = rows as f64 * cell_h + 30.0;
    let ymax = ranking.histogram.iter().flatten().copied().max().unwrap_or(1).max(1) as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    svg.push_str(
        "<defs><pattern id=\"hatch\" patternUnits=\"userSpaceOnUse\" width=\"6\" height=\"6\" patternTransform=\"rotate(45)\">\
         <rect width=\"6\" height=\"6\" fill=\"#c6dbef\"/><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#08306b\" stroke-width=\"2.5\"/>\
         </pattern></defs>\n",
    );
    let _ = writeln!(svg, "<title>Bootstrap importance-rank distributions ({} fits)</title>", ranking.sims);
    for (slot, &f) in order.iter().enumerate() {
        let (c, r) = (slot % cols, slot / cols);
        let frame =
            Frame { xmin: 0.5, xmax: n_ranks as f64 + 0.5, ymin: 0.0, ymax: ymax * 1.05, width: pw, height: ph };
        let (dx, dy) = (50.0 + c as f64 * cell_w, 40.0 + r as f64 * cell_h);
        frame.open(&mut svg, "panel ranks", dx, dy);
        frame.y_ticks(&mut svg);
        let bar_w = pw / n_ranks as f64 * 0.8;
        for (k, &count) in ranking.histogram[f].iter().enumerate() {
            let rank = k + 1;
            let x = frame.x(rank as f64) - bar_w / 2.0;
            let y = frame.y(f64::from(count));
            let fill = if rank == ranking.total_rank[f] { "url(#hatch)" } else { "#9ecae1" };
            let _ = writeln!(
                svg,
                r##"<rect class="bar" data-rank="{rank}" data-count="{count}" x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{:.2}" fill="{fill}" stroke="#08306b" stroke-width="0.5"/>"##,
                ph - y
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="9" text-anchor="middle">{rank}</text>"#,
                frame.x(rank as f64),
                ph + 12.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="-8" font-size="12" text-anchor="middle">{} (total rank {})</text>"#,
            pw / 2.0,
            escape(&feature_title(&ranking.features[f])),
            ranking.total_rank[f]
        );
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    svg
}

fn feature_title(key: &str) -> String {
    key.parse::<crate::featurize::Feature>().map(|f| f.label().to_string()).unwrap_or_else(|_| key.to_string())
}
