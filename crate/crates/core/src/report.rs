//! Figure data and tabular exports: quantile curves of individual effects
//! with simultaneous bands, sorted interval plots of marginal effects, CSV
//! round-trips and a small deterministic SVG renderer.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsinfer::{EffectProfile, EffectRow};
use crate::error::{Error, Result};
use crate::stats::order_rank;

/// Percentiles 1..=99.
pub fn default_grid() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    pub levels: Vec<f64>,
    pub effect: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub share_significant_negative: f64,
    pub share_significant_positive: f64,
}

/// Empirical quantiles of the effects. Individuals are sorted by effect
/// and each carries its own band endpoints with its rank, so the band at
/// level q is the band of the ⌈q·n⌉-th order statistic.
pub fn quantile_curve(profile: &EffectProfile, grid: &[f64]) -> QuantileCurve {
    let n = profile.effects.len();
    assert!(n > 0, "quantile curve of an empty profile");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| profile.effects[a].total_cmp(&profile.effects[b]).then(a.cmp(&b)));
    let mut levels = grid.to_vec();
    levels.sort_by(f64::total_cmp);
    let mut curve = QuantileCurve {
        share_significant_negative: share(&profile.significant_negative),
        share_significant_positive: share(&profile.significant_positive),
        ..Default::default()
    };
    for &q in &levels {
        let i = order[order_rank(n, q)];
        let (e, h) = (profile.effects[i], profile.band_halfwidth[i]);
        curve.levels.push(q);
        curve.effect.push(e);
        curve.lower.push(e - h);
        curve.upper.push(e + h);
    }
    curve
}

fn share(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub level: f64,
    pub effect: f64,
    pub lower: f64,
    pub upper: f64,
}

impl QuantileCurve {
    pub fn rows(&self) -> Vec<QuantileRow> {
        (0..self.levels.len())
            .map(|k| QuantileRow {
                level: self.levels[k],
                effect: self.effect[k],
                lower: self.lower[k],
                upper: self.upper[k],
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPoint {
    pub label: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant: bool,
}

/// Levels of one source variable, ascending by estimate, with simultaneous
/// intervals. The reference line sits at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPlot {
    pub variable: String,
    pub points: Vec<IntervalPoint>,
}

/// Main-effect rows whose label belongs to `variable`.
pub fn effect_interval_plot(table: &[EffectRow], variable: &str) -> Result<IntervalPlot> {
    let var_of = |label: &str| -> Option<String> {
        let l = crate::dataprep::ColumnLabel::parse(label).ok()?;
        (l.parts.len() == 1).then(|| l.parts[0].variable.clone())
    };
    let mut points: Vec<IntervalPoint> = table
        .iter()
        .filter(|r| var_of(&r.label).as_deref() == Some(variable))
        .map(|r| IntervalPoint {
            label: r.label.clone(),
            estimate: r.estimate,
            lower: r.sim_lower,
            upper: r.sim_upper,
            significant: r.significant,
        })
        .collect();
    if points.is_empty() {
        let mut available: Vec<String> = table.iter().filter_map(|r| var_of(&r.label)).collect();
        available.sort();
        available.dedup();
        return Err(Error::Config(format!(
            "no effects for variable `{variable}` (available: {})",
            available.join(", ")
        )));
    }
    points.sort_by(|a, b| a.estimate.total_cmp(&b.estimate).then_with(|| a.label.cmp(&b.label)));
    Ok(IntervalPlot {
        variable: variable.to_string(),
        points,
    })
}

/// Writes serializable rows as RFC 4180 CSV with a header.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Numerical(format!("csv serialization: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::Numerical(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Data(format!("csv: {e}"))))
        .collect()
}

pub fn write_csv_file<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, std::io::BufWriter::new(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub font_size: f64,
    pub line_color: String,
    pub band_color: String,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            width: 640.0,
            height: 420.0,
            margin: 56.0,
            font_size: 12.0,
            line_color: "#000000".into(),
            band_color: "#9a9a9a".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Quantiles { title: String, curve: QuantileCurve },
    Intervals(IntervalPlot),
}

struct Frame<'a> {
    style: &'a SvgStyle,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame<'_> {
    fn sx(&self, x: f64) -> f64 {
        let s = self.style;
        s.margin + (x - self.x0) / (self.x1 - self.x0) * (s.width - 2.0 * s.margin)
    }

    fn sy(&self, y: f64) -> f64 {
        let s = self.style;
        s.height - s.margin - (y - self.y0) / (self.y1 - self.y0) * (s.height - 2.0 * s.margin)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return (-1.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, dash: bool) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dash { " stroke-dasharray=\"4 3\"" } else { "" };
    let _ = writeln!(
        out,
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
        coords.join(" ")
    );
}

fn axes(out: &mut String, f: &Frame<'_>, title: &str, xlabel: &str, ylabel: &str) {
    let s = f.style;
    let (l, r) = (s.margin, s.width - s.margin);
    let (t, b) = (s.margin, s.height - s.margin);
    let _ = writeln!(
        out,
        "<rect x=\"{l:.2}\" y=\"{t:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#000000\"/>",
        r - l,
        b - t
    );
    for k in 0..=4 {
        let v = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let y = f.sy(v);
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{l:.2}\" y2=\"{y:.2}\" stroke=\"#000000\"/>",
            l - 4.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2}</text>",
            l - 6.0,
            y + s.font_size / 3.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        s.width / 2.0,
        t - 16.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        s.width / 2.0,
        s.height - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>",
        s.height / 2.0,
        s.height / 2.0,
        escape(ylabel)
    );
}

/// Renders plot data as SVG text. Output depends only on the inputs.
pub fn render_svg(plot: &PlotData, style: &SvgStyle) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\" font-family=\"sans-serif\" font-size=\"{:.0}\">",
        style.width, style.height, style.width, style.height, style.font_size
    );
    match plot {
        PlotData::Quantiles { title, curve } => {
            let (y0, y1) = range(curve.lower.iter().chain(&curve.upper).chain(&[0.0]).copied());
            let f = Frame { style, x0: 0.0, x1: 1.0, y0, y1 };
            axes(&mut out, &f, title, "quantile", "effect (log points)");
            let zero = f.sy(0.0);
            let _ = writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{zero:.2}\" x2=\"{:.2}\" y2=\"{zero:.2}\" stroke=\"{}\" stroke-width=\"0.8\"/>",
                f.sx(0.0),
                f.sx(1.0),
                style.band_color
            );
            if !curve.levels.is_empty() {
                let mut band: Vec<(f64, f64)> = curve
                    .levels
                    .iter()
                    .zip(&curve.upper)
                    .map(|(q, u)| (f.sx(*q), f.sy(*u)))
                    .collect();
                band.extend(
                    curve
                        .levels
                        .iter()
                        .zip(&curve.lower)
                        .rev()
                        .map(|(q, l)| (f.sx(*q), f.sy(*l))),
                );
                let coords: Vec<String> = band.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    out,
                    "<polygon fill=\"{}\" fill-opacity=\"0.3\" stroke=\"none\" points=\"{}\"/>",
                    style.band_color,
                    coords.join(" ")
                );
                let line = |v: &[f64]| -> Vec<(f64, f64)> {
                    curve.levels.iter().zip(v).map(|(q, e)| (f.sx(*q), f.sy(*e))).collect()
                };
                polyline(&mut out, &line(&curve.lower), &style.band_color, true);
                polyline(&mut out, &line(&curve.upper), &style.band_color, true);
                polyline(&mut out, &line(&curve.effect), &style.line_color, false);
            }
        }
        PlotData::Intervals(p) => {
            let m = p.points.len();
            let (x0, x1) = range(p.points.iter().flat_map(|q| [q.lower, q.upper]).chain([0.0]));
            let f = Frame { style, x0, x1, y0: 0.0, y1: m.max(1) as f64 };
            axes(&mut out, &f, &p.variable, "effect (log points)", "");
            let zero = f.sx(0.0);
            let _ = writeln!(
                out,
                "<line x1=\"{zero:.2}\" y1=\"{:.2}\" x2=\"{zero:.2}\" y2=\"{:.2}\" stroke=\"{}\"/>",
                f.sy(0.0),
                f.sy(m.max(1) as f64),
                style.band_color
            );
            for (k, q) in p.points.iter().enumerate() {
                let y = f.sy(k as f64 + 0.5);
                let _ = writeln!(
                    out,
                    "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{}\"/>",
                    f.sx(q.lower),
                    f.sx(q.upper),
                    style.line_color
                );
                let fill = if q.significant { style.line_color.as_str() } else { "#ffffff" };
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{fill}\" stroke=\"{}\"/>",
                    f.sx(q.estimate),
                    style.line_color
                );
                let _ = writeln!(
                    out,
                    "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"start\" font-size=\"{:.0}\">{}</text>",
                    style.width - style.margin + 4.0,
                    y + style.font_size / 3.0,
                    style.font_size * 0.8,
                    escape(&q.label)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(plot: &PlotData, style: &SvgStyle, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(plot, style)).map_err(|e| Error::io(path, e))
}
