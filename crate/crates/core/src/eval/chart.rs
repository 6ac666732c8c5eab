//! Minimal static SVG charts for experiment output.

use std::fmt::Write;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 32.0;
const MARGIN_B: f64 = 44.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Axis { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn label(&self, t: f64) -> String {
        let v = self.lo + t * (self.hi - self.lo);
        let v = if self.log { 10f64.powf(v) } else { v };
        format!("{v:.3}")
    }
}

/// Line charts laid out left to right.
pub fn line_chart(panels: &[Panel]) -> String {
    let mut out = String::new();
    let width = PANEL_W * panels.len().max(1) as f64;
    header(&mut out, width, PANEL_H + 20.0);
    for (k, panel) in panels.iter().enumerate() {
        let x0 = k as f64 * PANEL_W + MARGIN_L;
        let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
        let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
        let y0 = MARGIN_T;
        let points = || panel.series.iter().flat_map(|s| s.points.iter());
        let ax = Axis::new(points().map(|p| p.0), panel.log_x);
        let ay = Axis::new(points().map(|p| p.1), panel.log_y);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + plot_w / 2.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{x0}" y="{y0}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
        );
        for t in [0.0, 0.5, 1.0] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                x0 + t * plot_w,
                y0 + plot_h + 14.0,
                ax.label(t)
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                y0 + (1.0 - t) * plot_h + 4.0,
                ay.label(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + plot_w / 2.0,
            y0 + plot_h + 32.0,
            escape(&panel.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
            x0 - 48.0,
            y0 + plot_h / 2.0,
            x0 - 48.0,
            y0 + plot_h / 2.0,
            escape(&panel.y_label)
        );
        for (s, series) in panel.series.iter().enumerate() {
            let colour = PALETTE[s % PALETTE.len()];
            let coords: Vec<String> = series
                .points
                .iter()
                .filter_map(|&(x, y)| {
                    Some(format!(
                        "{:.2},{:.2}",
                        x0 + ax.frac(x)? * plot_w,
                        y0 + (1.0 - ay.frac(y)?) * plot_h
                    ))
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
            for c in &coords {
                let (cx, cy) = c.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{colour}"/>"#);
            }
            let ly = y0 + 12.0 + 14.0 * s as f64;
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{ly}" fill="{colour}">{}</text>"#,
                x0 + 6.0,
                escape(&series.name)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One bar per entry.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, PANEL_W, PANEL_H);
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let top = bars.iter().map(|b| b.1).filter(|v| v.is_finite()).fold(0.0, f64::max).max(1e-12);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(y_label)
    );
    let slot = plot_w / bars.len().max(1) as f64;
    for (k, (name, value)) in bars.iter().enumerate() {
        let h = if value.is_finite() { value / top * plot_h } else { 0.0 };
        let x = MARGIN_L + k as f64 * slot + slot * 0.15;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}"/>"#,
            MARGIN_T + plot_h - h,
            slot * 0.7,
            PALETTE[k % PALETTE.len()]
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{value:.3}</text>"#,
            x + slot * 0.35,
            MARGIN_T + plot_h - h - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x + slot * 0.35,
            MARGIN_T + plot_h + 16.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn shade(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t) as u8;
    let b = (255.0 * (1.0 - t)) as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Square heatmaps sharing one colour scale. Each grid is `resolution^2`
/// values, first coordinate varying slowest.
pub fn heatmaps(panels: &[(String, Vec<f64>)], resolution: usize) -> String {
    let mut out = String::new();
    let side = PANEL_H - MARGIN_T - 12.0;
    let width = (side + 24.0) * panels.len().max(1) as f64;
    header(&mut out, width, PANEL_H);
    let (lo, hi) = panels
        .iter()
        .flat_map(|p| p.1.iter().copied())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cell = side / resolution.max(1) as f64;
    for (k, (title, values)) in panels.iter().enumerate() {
        let x0 = 12.0 + k as f64 * (side + 24.0);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + side / 2.0,
            escape(title)
        );
        for (idx, v) in values.iter().enumerate() {
            let (i, j) = (idx / resolution, idx % resolution);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x0 + i as f64 * cell,
                MARGIN_T + side - (j + 1) as f64 * cell,
                cell + 0.05,
                cell + 0.05,
                shade((v - lo) / span)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
