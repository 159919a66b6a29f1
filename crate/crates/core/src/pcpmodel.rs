//! Parallel-coordinate plot model colored by a weighted metric, plus a
//! standalone SVG renderer.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::pareto::ParetoSet;
use crate::preference::{weighted_metric, WeightVector};

pub const DEFAULT_TOP_K: usize = 30;
pub const MIN_SVG_WIDTH: u32 = 320;
pub const MIN_SVG_HEIGHT: u32 = 240;

/// Colormap stops at t = 0, 0.25, 0.5, 0.75, 1: deep blue (better) through
/// teal and green to yellow (worse).
pub const COLOR_STOPS: [[u8; 3]; 5] = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PcpError {
    #[error("expected {expected} weights, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("value {phi} lies outside [{lo}, {hi}]")]
    OutOfRange { phi: f64, lo: f64, hi: f64 },
    #[error("canvas {width}x{height} is smaller than {MIN_SVG_WIDTH}x{MIN_SVG_HEIGHT}")]
    DegenerateDimensions { width: u32, height: u32 },
}

impl PcpError {
    pub fn name(&self) -> &'static str {
        match self {
            PcpError::LengthMismatch { .. } => "LengthMismatch",
            PcpError::OutOfRange { .. } => "OutOfRange",
            PcpError::DegenerateDimensions { .. } => "DegenerateDimensions",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Param,
    Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub kind: AxisKind,
}

impl AxisSpec {
    /// Zero-width ranges are widened by 0.5 on each side.
    fn new(name: &str, lo: f64, hi: f64, kind: AxisKind) -> Self {
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { name: name.to_string(), lo, hi, kind }
    }

    fn normalize(&self, value: f64) -> f64 {
        ((value - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u8; 3]", into = "[u8; 3]")]
pub struct Rgb(pub [u8; 3]);

impl From<[u8; 3]> for Rgb {
    fn from(c: [u8; 3]) -> Self {
        Rgb(c)
    }
}

impl From<Rgb> for [u8; 3] {
    fn from(c: Rgb) -> Self {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub record: usize,
    /// One value in `[0, 1]` per axis.
    pub vertices: Vec<f64>,
    pub color: Rgb,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcpModel {
    pub axes: Vec<AxisSpec>,
    /// Included records in ascending record order.
    pub polylines: Vec<Polyline>,
    #[serde(skip)]
    pub phi_range: (f64, f64),
    pub weights: WeightVector,
}

/// Builds the plot over the Pareto solutions plus the `top_k` best
/// remaining records under the weighted metric. Ties at the cutoff go to
/// the lower record index.
pub fn build_pcp(dataset: &Dataset, pareto: &ParetoSet, w: &WeightVector, top_k: usize) -> Result<PcpModel, PcpError> {
    if w.len() != dataset.n_metrics() {
        return Err(PcpError::LengthMismatch { expected: dataset.n_metrics(), got: w.len() });
    }
    let records = dataset.records();
    let phi: Vec<f64> = records
        .iter()
        .map(|r| weighted_metric(w, &r.metrics).expect("lengths checked above"))
        .collect();

    let mut included: Vec<usize> = pareto.indices.clone();
    let mut rest: Vec<usize> = (0..records.len()).filter(|&k| !pareto.contains(k)).collect();
    rest.sort_by(|&a, &b| phi[a].total_cmp(&phi[b]).then(a.cmp(&b)));
    included.extend(rest.into_iter().take(top_k));
    included.sort_unstable();

    let axes = build_axes(dataset);
    let (lo, hi) = included
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| (lo.min(phi[k]), hi.max(phi[k])));

    let polylines = included
        .iter()
        .map(|&k| {
            let rec = &records[k];
            let vertices = rec.params.iter().chain(&rec.metrics).zip(&axes).map(|(v, ax)| ax.normalize(*v)).collect();
            let color = color_for(phi[k], lo, hi).expect("phi lies within its own range");
            Polyline { record: k, vertices, color, phi: phi[k] }
        })
        .collect();

    Ok(PcpModel { axes, polylines, phi_range: (lo, hi), weights: w.clone() })
}

/// Parameter axes use the declared domains; metric axes span the whole
/// dataset so they stay fixed when the weights change.
fn build_axes(dataset: &Dataset) -> Vec<AxisSpec> {
    let params = dataset
        .param_names()
        .iter()
        .zip(dataset.param_domains())
        .map(|(name, dom)| AxisSpec::new(name, dom.lo, dom.hi, AxisKind::Param));
    let metrics = dataset.metric_names().iter().enumerate().map(|(m, name)| {
        let (lo, hi) = dataset
            .metric_vectors()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f[m]), hi.max(f[m])));
        AxisSpec::new(name, lo, hi, AxisKind::Metric)
    });
    params.chain(metrics).collect()
}

/// Position of `phi` along the colormap, 0 at the best value.
pub fn color_param(phi: f64, phi_min: f64, phi_max: f64) -> Result<f64, PcpError> {
    if !(phi_min <= phi && phi <= phi_max) {
        return Err(PcpError::OutOfRange { phi, lo: phi_min, hi: phi_max });
    }
    if phi_max == phi_min {
        return Ok(0.0);
    }
    Ok(((phi - phi_min) / (phi_max - phi_min)).clamp(0.0, 1.0))
}

pub fn color_for(phi: f64, phi_min: f64, phi_max: f64) -> Result<Rgb, PcpError> {
    Ok(colormap(color_param(phi, phi_min, phi_max)?))
}

/// Piecewise-linear interpolation over [`COLOR_STOPS`].
pub fn colormap(t: f64) -> Rgb {
    let segments = (COLOR_STOPS.len() - 1) as f64;
    let scaled = t.clamp(0.0, 1.0) * segments;
    let idx = (scaled.floor() as usize).min(COLOR_STOPS.len() - 2);
    let local = scaled - idx as f64;
    let (from, to) = (COLOR_STOPS[idx], COLOR_STOPS[idx + 1]);
    let mut out = [0u8; 3];
    for c in 0..3 {
        let v = f64::from(from[c]) + (f64::from(to[c]) - f64::from(from[c])) * local;
        out[c] = v.round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}

const MARGIN_X: f64 = 60.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 40.0;

/// Renders a standalone SVG: one vertical `<line>` per axis with its name
/// and range labels, one `<path>` per polyline. Worse lines are drawn first
/// so the best ones end up on top.
pub fn render_svg(model: &PcpModel, width: u32, height: u32) -> Result<String, PcpError> {
    if width < MIN_SVG_WIDTH || height < MIN_SVG_HEIGHT {
        return Err(PcpError::DegenerateDimensions { width, height });
    }
    let (w, h) = (f64::from(width), f64::from(height));
    let n_axes = model.axes.len();
    let axis_x = |k: usize| -> f64 {
        if n_axes <= 1 {
            w / 2.0
        } else {
            MARGIN_X + (w - 2.0 * MARGIN_X) * k as f64 / (n_axes - 1) as f64
        }
    };
    let top = MARGIN_TOP;
    let bottom = h - MARGIN_BOTTOM;
    let y_of = |v: f64| bottom - (bottom - top) * v;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);

    let mut order: Vec<&Polyline> = model.polylines.iter().collect();
    order.sort_by(|a, b| b.phi.total_cmp(&a.phi).then(b.record.cmp(&a.record)));
    let _ = writeln!(svg, r#"<g fill="none" stroke-width="1.2" stroke-opacity="0.85">"#);
    for line in order {
        let mut d = String::new();
        for (k, v) in line.vertices.iter().enumerate() {
            let cmd = if k == 0 { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{:.2},{:.2} ", axis_x(k), y_of(*v));
        }
        let [r, g, b] = line.color.0;
        let _ = writeln!(
            svg,
            r#"<path d="{}" stroke="rgb({r},{g},{b})" data-record="{}"/>"#,
            d.trim_end(),
            line.record
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g stroke="black" stroke-width="1" font-family="sans-serif" font-size="11">"#);
    for (k, axis) in model.axes.iter().enumerate() {
        let x = axis_x(k);
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{bottom:.2}"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" stroke="none">{}</text>"#,
            top - 22.0,
            escape_xml(&axis.name)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" stroke="none" fill="dimgray">{}</text>"#,
            top - 6.0,
            format_tick(axis.hi)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" stroke="none" fill="dimgray">{}</text>"#,
            bottom + 16.0,
            format_tick(axis.lo)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn format_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".to_string() } else { s.to_string() }
    }
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}
