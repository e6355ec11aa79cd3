//! Minimal SVG output for line plots and heatmaps.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
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
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn axes(out: &mut String, x: (f64, f64), y: (f64, f64), x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let _ = writeln!(
        out,
        r#"<path d="M{x0} {y1} V{y0} H{x1}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let px = x0 + f * (x1 - x0);
        let py = y0 - f * (y0 - y1);
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#,
            y0 + 16.0,
            x.0 + f * (x.1 - x.0)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            x0 - 6.0,
            py + 4.0,
            y.0 + f * (y.1 - y.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let xr = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    axes(&mut out, xr, yr, x_label, y_label);
    let sx = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * (WIDTH - RIGHT - LEFT);
    let sy = |y: f64| HEIGHT - BOTTOM - (y - yr.0) / (yr.1 - yr.0) * (HEIGHT - BOTTOM - TOP);
    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 16.0 * k as f64 + 8.0;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}

/// White-to-blue scale on `[0, 1]`.
fn shade(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let r = (255.0 * (1.0 - 0.9 * v)) as u8;
    let g = (255.0 * (1.0 - 0.7 * v)) as u8;
    format!("rgb({r},{g},255)")
}

/// `grid[row][col]` with values in `[0, 1]`; columns labelled, rows spanning
/// `y_range` from bottom to top.
pub fn heatmap(
    title: &str,
    column_labels: &[String],
    y_label: &str,
    y_range: (f64, f64),
    grid: &[Vec<f64>],
) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let rows = grid.len().max(1);
    let cols = column_labels.len().max(1);
    let cw = (x1 - x0) / cols as f64;
    let rh = (y0 - y1) / rows as f64;
    for (r, row) in grid.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x0 + c as f64 * cw,
                y0 - (r + 1) as f64 * rh,
                cw + 0.3,
                rh + 0.3,
                shade(v)
            );
        }
    }
    let step = (cols / 12).max(1);
    for (c, label) in column_labels.iter().enumerate().step_by(step) {
        let _ = writeln!(
            out,
            r#"<text transform="translate({:.1} {:.1}) rotate(-60)" text-anchor="end" font-size="10">{}</text>"#,
            x0 + (c as f64 + 0.5) * cw,
            y0 + 10.0,
            escape(label)
        );
    }
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            x0 - 6.0,
            y0 - f * (y0 - y1) + 4.0,
            y_range.0 + f * (y_range.1 - y_range.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    for k in 0..=10 {
        let v = k as f64 / 10.0;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="14" height="{:.1}" fill="{}"/>"#,
            x1 + 20.0,
            y0 - (k + 1) as f64 * (y0 - y1) / 11.0,
            (y0 - y1) / 11.0 + 0.3,
            shade(v)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">1</text>"#, x1 + 40.0, y1 + 10.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">0</text>"#, x1 + 40.0, y0);
    out.push_str("</svg>\n");
    out
}
