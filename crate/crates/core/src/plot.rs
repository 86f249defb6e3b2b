//! Minimal static SVG charts: lines for simulated series, markers for data.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{read_text, write_text};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, style: Style::Line }
    }

    pub fn markers(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, style: Style::Markers }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 180.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn unescape(s: &str) -> String {
    s.replace("&quot;", "\"").replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi - lo > 0.0 {
        (lo, hi)
    } else {
        // flat series still gets a visible band
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    }
}

/// Renders the chart to SVG text.
pub fn render_svg(chart: &Chart) -> Result<String> {
    if chart.series.is_empty() {
        return Err(Error::invalid("chart has no series"));
    }
    if let Some(s) = chart.series.iter().find(|s| s.points.is_empty()) {
        return Err(Error::invalid(format!("series '{}' has no points", s.label)));
    }
    let all = || chart.series.iter().flat_map(|s| s.points.iter());
    if all().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("chart points must be finite"));
    }
    let (x0, x1) = bounds(all().map(|p| p.0));
    let (y0, y1) = bounds(all().map(|p| p.1).chain(std::iter::once(0.0)));
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, MARGIN_L + plot_w / 2.0, escape(&chart.title)).unwrap();
    writeln!(
        svg,
        r#"<rect class="frame" x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )
    .unwrap();

    for i in 0..=5 {
        let fx = x0 + (x1 - x0) * i as f64 / 5.0;
        let fy = y0 + (y1 - y0) * i as f64 / 5.0;
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, px(fx), MARGIN_T + plot_h + 18.0, tick(fx)).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN_L - 6.0, py(fy) + 4.0, tick(fy)).unwrap();
        writeln!(svg, r##"<line x1="{MARGIN_L}" x2="{:.2}" y1="{:.2}" y2="{:.2}" stroke="#dddddd"/>"##, MARGIN_L + plot_w, py(fy), py(fy)).unwrap();
    }
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, MARGIN_L + plot_w / 2.0, HEIGHT - 15.0, escape(&chart.x_label)).unwrap();
    writeln!(
        svg,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        MARGIN_T + plot_h / 2.0,
        escape(&chart.y_label)
    )
    .unwrap();

    for (k, s) in chart.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let label = escape(&s.label);
        let data: Vec<String> = s.points.iter().map(|(x, y)| format!("{x},{y}")).collect();
        let data = data.join(" ");
        match s.style {
            Style::Line => {
                let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
                writeln!(
                    svg,
                    r#"<polyline class="series line" data-label="{label}" data-values="{data}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                    pts.join(" ")
                )
                .unwrap();
            }
            Style::Markers => {
                writeln!(svg, r#"<g class="series markers" data-label="{label}" data-values="{data}" fill="{color}">"#).unwrap();
                for &(x, y) in &s.points {
                    writeln!(svg, r#"  <circle cx="{:.2}" cy="{:.2}" r="3.5"/>"#, px(x), py(y)).unwrap();
                }
                svg.push_str("</g>\n");
            }
        }
        let ly = MARGIN_T + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - MARGIN_R + 15.0;
        match s.style {
            Style::Line => writeln!(svg, r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0).unwrap(),
            Style::Markers => writeln!(svg, r#"<circle cx="{}" cy="{ly}" r="3.5" fill="{color}"/>"#, lx + 10.0).unwrap(),
        }
        writeln!(svg, r#"<text x="{}" y="{}">{label}</text>"#, lx + 26.0, ly + 4.0).unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

pub fn render_plot(chart: &Chart, path: &Path) -> Result<()> {
    write_text(path, &render_svg(chart)?)
}

fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
    let key = format!(" {name}=\"");
    let start = tag.find(&key)? + key.len();
    let len = tag[start..].find('"')?;
    Some(&tag[start..start + len])
}

/// Recovers the series (label, style, data points) from SVG text written by [`render_svg`].
pub fn parse_svg_series(svg: &str) -> Result<Vec<Series>> {
    let mut out = Vec::new();
    for line in svg.lines() {
        let line = line.trim();
        if !line.contains("class=\"series ") {
            continue;
        }
        let style = if line.starts_with("<polyline") { Style::Line } else { Style::Markers };
        let label = attr(line, "data-label").ok_or_else(|| Error::invalid("series without label"))?;
        let values = attr(line, "data-values").ok_or_else(|| Error::invalid("series without values"))?;
        let points = values
            .split_whitespace()
            .map(|pair| {
                let (x, y) = pair.split_once(',').ok_or_else(|| Error::invalid(format!("bad point '{pair}'")))?;
                let num = |s: &str| s.parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{s}'")));
                Ok((num(x)?, num(y)?))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Series { label: unescape(label), points, style });
    }
    Ok(out)
}

pub fn read_plot_series(path: &Path) -> Result<Vec<Series>> {
    parse_svg_series(&read_text(path)?)
}
