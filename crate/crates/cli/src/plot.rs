//! Static SVG figures from result and series CSVs.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cdqc::experiment::{self, ResultRow, SeriesRow};
use clap::ValueEnum;
use plotters::coord::ranged1d::{AsRangedCoord, ValueFormatter};
use plotters::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Ensemble-mean coherence against t/T, one curve per (order, TΔ).
    CoherenceTime,
    /// Ensemble-mean C_P against TΔ, one curve per order.
    CpVsTdelta,
    /// Ensemble-mean C_P against success probability, parametrized by TΔ.
    CpVsSuccess,
    /// Ensemble-mean ΔĒ against TΔ, one curve per order.
    DeVsT,
}

struct Curve {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Figure {
    title: &'static str,
    x_label: &'static str,
    y_label: &'static str,
    x_log: bool,
    curves: Vec<Curve>,
}

pub fn render(csv: &Path, kind: PlotKind, out: &Path) -> Result<()> {
    let file = File::open(csv).with_context(|| format!("opening {}", csv.display()))?;
    let figure = match kind {
        PlotKind::CoherenceTime => {
            let rows = experiment::read_series_csv(file).with_context(|| format!("reading {}", csv.display()))?;
            if rows.is_empty() {
                bail!("{} has no rows", csv.display());
            }
            coherence_time(&rows)
        }
        _ => {
            let rows = experiment::read_rows_csv(file).with_context(|| format!("reading {}", csv.display()))?;
            if rows.is_empty() {
                bail!("{} has no rows", csv.display());
            }
            per_order(&rows, kind)
        }
    };
    if figure.curves.iter().all(|c| c.points.is_empty()) {
        bail!("{} has no finite values to plot", csv.display());
    }
    draw(&figure, out)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn per_order(rows: &[ResultRow], kind: PlotKind) -> Figure {
    let mut groups: BTreeMap<usize, BTreeMap<u64, Vec<&ResultRow>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.is_flagged()) {
        groups.entry(r.order_l).or_default().entry(r.t_delta.to_bits()).or_default().push(r);
    }
    let curves = groups
        .into_iter()
        .map(|(order, by_t)| {
            let mut points: Vec<(f64, f64)> = by_t
                .into_values()
                .map(|g| {
                    let t_delta = g[0].t_delta;
                    let cp = mean(&g.iter().map(|r| r.c_p).collect::<Vec<_>>());
                    match kind {
                        PlotKind::CpVsSuccess => (mean(&g.iter().map(|r| r.p_success).collect::<Vec<_>>()), cp),
                        PlotKind::DeVsT => (t_delta, mean(&g.iter().map(|r| r.de_avg).collect::<Vec<_>>())),
                        _ => (t_delta, cp),
                    }
                })
                .collect();
            points.retain(|(x, y)| x.is_finite() && y.is_finite());
            Curve {
                label: format!("l = {order}"),
                points,
            }
        })
        .collect();
    let (title, x_label, y_label, x_log) = match kind {
        PlotKind::CpVsSuccess => ("Mean coherence vs success probability", "p", "C_P (bits)", false),
        PlotKind::DeVsT => ("Average energy fluctuation", "TΔ", "ΔĒ", true),
        _ => ("Mean coherence", "TΔ", "C_P (bits)", true),
    };
    Figure {
        title,
        x_label,
        y_label,
        x_log,
        curves,
    }
}

fn coherence_time(rows: &[SeriesRow]) -> Figure {
    // (order, TΔ) -> sample time fraction -> values over instances
    let mut groups: BTreeMap<(usize, u64), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        let frac = if r.total_time > 0.0 { r.t / r.total_time } else { 0.0 };
        groups
            .entry((r.order_l, r.t_delta.to_bits()))
            .or_default()
            .entry(frac.to_bits())
            .or_default()
            .push(r.coherence);
    }
    let curves = groups
        .into_iter()
        .map(|((order, t_bits), samples)| {
            let mut points: Vec<(f64, f64)> = samples
                .into_iter()
                .map(|(frac, v)| (f64::from_bits(frac), mean(&v)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Curve {
                label: format!("l = {order}, TΔ = {}", f64::from_bits(t_bits)),
                points,
            }
        })
        .collect();
    Figure {
        title: "Coherence along the evolution",
        x_label: "t / T",
        y_label: "C(t) (bits)",
        x_log: false,
        curves,
    }
}

fn padded(lo: f64, hi: f64, log: bool) -> (f64, f64) {
    if log {
        if hi > lo {
            (lo / 1.2, hi * 1.2)
        } else {
            (lo / 2.0, hi * 2.0)
        }
    } else if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn draw(figure: &Figure, out: &Path) -> Result<()> {
    let all = figure.curves.iter().flat_map(|c| c.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if figure.x_log && !(x0 > 0.0) {
        bail!("log axis needs positive x values");
    }
    let (x0, x1) = padded(x0, x1, figure.x_log);
    let (y0, y1) = padded(y0, y1, false);
    if figure.x_log {
        draw_with(figure, out, (x0..x1).log_scale(), y0..y1)
    } else {
        draw_with(figure, out, x0..x1, y0..y1)
    }
}

fn draw_with<X>(figure: &Figure, out: &Path, x: X, y: std::ops::Range<f64>) -> Result<()>
where
    X: AsRangedCoord<Value = f64>,
    X::CoordDescType: ValueFormatter<f64>,
{
    let root = SVGBackend::new(out, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(figure.title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(44)
        .y_label_area_size(60)
        .build_cartesian_2d(x, y)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(figure.x_label)
        .y_desc(figure.y_label)
        .draw()
        .map_err(plot_err)?;
    for (k, curve) in figure.curves.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(curve.points.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(curve.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        chart
            .draw_series(curve.points.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn plot_err<E: std::fmt::Debug>(e: E) -> anyhow::Error {
    anyhow::anyhow!("plotting failed: {e:?}")
}
