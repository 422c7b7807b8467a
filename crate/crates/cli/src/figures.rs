//! Figures from simulate output: importance trends against delta, the
//! absorption coefficient, t/LOCO parity scatter and per-cell differences.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use vimp_core::simlab::{
    facet_slopes, through_origin_slope, Metric, ModelKind, ParityPoint, AGGREGATE_HEADER, PARITY_HEADER,
};

use crate::args::ErrorBars;
use crate::error::{CliError, CliResult};
use crate::svg::{legend, padded, Frame, Svg, PALETTE};

/// Scatter points drawn per parity panel; slopes always use every point.
pub const MAX_SCATTER_POINTS: usize = 1500;

#[derive(Debug, Clone, PartialEq)]
pub struct AggRow {
    pub model: ModelKind,
    pub delta: f64,
    pub p: usize,
    pub n: usize,
    pub metric: Metric,
    pub emp_mean: f64,
    pub emp_sd: f64,
    pub emp_2se: f64,
    pub theory_raw: f64,
    pub theory_corrected: f64,
    pub rel_diff: Option<f64>,
    pub abs_diff: Option<f64>,
}

#[derive(Debug, Default)]
pub struct Inputs {
    pub aggregate: Vec<AggRow>,
    pub parity: Vec<ParityPoint>,
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &str) -> CliResult<()> {
    let want: Vec<&str> = expected.split(',').collect();
    for (k, name) in want.iter().enumerate() {
        match found.get(k) {
            Some(f) if f == *name => {}
            Some(f) => {
                return Err(CliError::input(path, format!("column {}: expected '{name}', found '{f}'", k + 1)));
            }
            None => return Err(CliError::input(path, format!("missing column '{name}'"))),
        }
    }
    if let Some(extra) = found.get(want.len()) {
        return Err(CliError::input(path, format!("unexpected column '{extra}'")));
    }
    Ok(())
}

struct Fields<'a> {
    path: &'a Path,
    record: &'a csv::StringRecord,
    names: &'a [&'a str],
    line: u64,
}

impl Fields<'_> {
    fn raw(&self, k: usize) -> &str {
        self.record.get(k).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, k: usize) -> CliResult<T> {
        let v = self.raw(k);
        v.parse().map_err(|_| {
            CliError::input(self.path, format!("line {}, column '{}': cannot parse '{v}'", self.line, self.names[k]))
        })
    }

    /// Empty fields stand for missing values.
    fn optional(&self, k: usize) -> CliResult<Option<f64>> {
        if self.raw(k).is_empty() {
            Ok(None)
        } else {
            self.parse(k).map(Some)
        }
    }
}

fn open(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new().from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::input(path, format!("{other:?}")),
    })
}

fn records(path: &Path, expected: &str, mut each: impl FnMut(Fields<'_>) -> CliResult<()>) -> CliResult<()> {
    let mut reader = open(path)?;
    let header = reader.headers().map_err(|e| CliError::input(path, e.to_string()))?.clone();
    check_header(path, &header, expected)?;
    let names: Vec<&str> = expected.split(',').collect();
    for rec in reader.records() {
        let record = rec.map_err(|e| CliError::input(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        each(Fields { path, record: &record, names: &names, line })?;
    }
    Ok(())
}

pub fn read_aggregate(path: &Path) -> CliResult<Vec<AggRow>> {
    let mut rows = Vec::new();
    records(path, AGGREGATE_HEADER, |f| {
        let model: ModelKind = f.parse(0)?;
        let metric: Metric = f.parse(4)?;
        rows.push(AggRow {
            model,
            delta: f.parse(1)?,
            p: f.parse(2)?,
            n: f.parse(3)?,
            metric,
            emp_mean: f.parse(5)?,
            emp_sd: f.optional(6)?.unwrap_or(f64::NAN),
            emp_2se: f.optional(7)?.unwrap_or(f64::NAN),
            theory_raw: f.optional(8)?.unwrap_or(f64::NAN),
            theory_corrected: f.optional(9)?.unwrap_or(f64::NAN),
            rel_diff: f.optional(10)?,
            abs_diff: f.optional(11)?,
        });
        Ok(())
    })?;
    Ok(rows)
}

pub fn read_parity(path: &Path) -> CliResult<Vec<ParityPoint>> {
    let mut points = Vec::new();
    records(path, PARITY_HEADER, |f| {
        points.push(ParityPoint {
            delta: f.parse(0)?,
            p: f.parse(1)?,
            n: f.parse(2)?,
            replicate: f.parse(3)?,
            variable: f.parse(4)?,
            t_transformed: f.parse(5)?,
            loco_corrected: f.parse(6)?,
        });
        Ok(())
    })?;
    Ok(points)
}

/// Loads simulate output directories (`aggregate.csv`, optional
/// `parity.csv`) or individual CSV files recognised by their header.
pub fn load(paths: &[std::path::PathBuf]) -> CliResult<Inputs> {
    let mut inputs = Inputs::default();
    for path in paths {
        if path.is_dir() {
            inputs.aggregate.extend(read_aggregate(&path.join("aggregate.csv"))?);
            let parity = path.join("parity.csv");
            if parity.exists() {
                inputs.parity.extend(read_parity(&parity)?);
            }
        } else {
            let first = open(path)?.headers().map(|h| h.get(0).unwrap_or("").to_string()).unwrap_or_default();
            let parity_first = PARITY_HEADER.split(',').next().unwrap_or("");
            if first == parity_first {
                inputs.parity.extend(read_parity(path)?);
            } else {
                inputs.aggregate.extend(read_aggregate(path)?);
            }
        }
    }
    Ok(inputs)
}

const PANEL_W: f64 = 170.0;
const PANEL_H: f64 = 120.0;
const GAP_X: f64 = 60.0;
const GAP_Y: f64 = 50.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_T: f64 = 60.0;
const LEGEND_W: f64 = 170.0;

/// Page layout for a `rows x cols` panel grid.
struct Layout {
    rows: usize,
    cols: usize,
}

impl Layout {
    fn size(&self) -> (f64, f64) {
        (
            MARGIN_L + self.cols as f64 * (PANEL_W + GAP_X) + LEGEND_W,
            MARGIN_T + self.rows as f64 * (PANEL_H + GAP_Y) + 20.0,
        )
    }

    fn frame(&self, row: usize, col: usize, x: (f64, f64), y: (f64, f64)) -> Frame {
        Frame {
            left: MARGIN_L + col as f64 * (PANEL_W + GAP_X),
            top: MARGIN_T + row as f64 * (PANEL_H + GAP_Y),
            width: PANEL_W,
            height: PANEL_H,
            x,
            y,
        }
    }

    fn legend_x(&self) -> f64 {
        MARGIN_L + self.cols as f64 * (PANEL_W + GAP_X)
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn axis_values(rows: &[&AggRow]) -> (Vec<usize>, Vec<usize>) {
    let ps: BTreeSet<usize> = rows.iter().map(|r| r.p).collect();
    let ns: BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
    (ps.into_iter().collect(), ns.into_iter().collect())
}

fn half_band(r: &AggRow, bars: ErrorBars) -> f64 {
    let v = match bars {
        ErrorBars::Se => r.emp_2se,
        ErrorBars::Sd => 2.0 * r.emp_sd,
    };
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

fn sorted_by_delta<'a>(rows: &[&'a AggRow]) -> Vec<&'a AggRow> {
    let mut v = rows.to_vec();
    v.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    v
}

/// Trend panels: one facet per `(p, n)`, empirical means with error bars and
/// theory curves (solid corrected, dashed uncorrected) for each metric.
fn trend_figure(rows: &[&AggRow], metrics: &[Metric], title: &str, bars: ErrorBars) -> String {
    let (ps, ns) = axis_values(rows);
    let layout = Layout { rows: ps.len(), cols: ns.len() };
    let (w, h) = layout.size();
    let mut svg = Svg::new(w, h);
    svg.text(w / 2.0, 24.0, 14.0, "middle", title);

    for (ri, &p) in ps.iter().enumerate() {
        for (ci, &n) in ns.iter().enumerate() {
            let facet: Vec<&AggRow> = rows.iter().copied().filter(|r| r.p == p && r.n == n).collect();
            if facet.is_empty() {
                continue;
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in facet.iter().filter(|r| metrics.contains(&r.metric)) {
                let band = half_band(r, bars);
                for v in [r.emp_mean - band, r.emp_mean + band, r.theory_raw, r.theory_corrected] {
                    if v.is_finite() {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
            let frame = layout.frame(ri, ci, (-0.03, 1.02), padded(lo, hi));
            frame.draw_axes(&mut svg, &format!("p = {p}, n = {n}"));
            for (mi, metric) in metrics.iter().enumerate() {
                let colour = PALETTE[mi % PALETTE.len()];
                let series = sorted_by_delta(&facet.iter().copied().filter(|r| r.metric == *metric).collect::<Vec<_>>());
                if series.is_empty() {
                    continue;
                }
                let xs: Vec<f64> = series.iter().map(|r| r.delta).collect();
                let ys: Vec<f64> = series.iter().map(|r| r.emp_mean).collect();
                svg.open_group(&[
                    ("class", "series".into()),
                    ("data-metric", metric.as_str().into()),
                    ("data-p", p.to_string()),
                    ("data-n", n.to_string()),
                    ("data-x", join(&xs)),
                    ("data-y", join(&ys)),
                ]);
                let corrected: Vec<(f64, f64)> = series
                    .iter()
                    .filter(|r| r.theory_corrected.is_finite())
                    .map(|r| (frame.sx(r.delta), frame.sy(r.theory_corrected)))
                    .collect();
                let raw: Vec<(f64, f64)> = series
                    .iter()
                    .filter(|r| r.theory_raw.is_finite())
                    .map(|r| (frame.sx(r.delta), frame.sy(r.theory_raw)))
                    .collect();
                if raw != corrected {
                    svg.polyline(&raw, colour, 1.0, Some("4,3"));
                }
                svg.polyline(&corrected, colour, 1.5, None);
                for r in &series {
                    let (x, y) = (frame.sx(r.delta), frame.sy(r.emp_mean));
                    let band = half_band(r, bars);
                    if band > 0.0 {
                        let (y1, y2) = (frame.sy(r.emp_mean - band), frame.sy(r.emp_mean + band));
                        svg.line(x, y1, x, y2, colour, 1.0, None);
                        svg.line(x - 3.0, y1, x + 3.0, y1, colour, 1.0, None);
                        svg.line(x - 3.0, y2, x + 3.0, y2, colour, 1.0, None);
                    }
                    svg.circle(x, y, 2.5, colour);
                }
                svg.close_group();
            }
        }
    }
    let bar_label = match bars {
        ErrorBars::Se => "bars: +-2 SE",
        ErrorBars::Sd => "bars: +-2 SD",
    };
    let mut entries: Vec<(&str, String, bool)> = metrics
        .iter()
        .enumerate()
        .map(|(mi, m)| (PALETTE[mi % PALETTE.len()], format!("{} theory", m.as_str()), false))
        .collect();
    entries.push(("#777", "uncorrected theory".into(), true));
    legend(&mut svg, layout.legend_x(), MARGIN_T, &entries);
    svg.text(layout.legend_x(), MARGIN_T + 14.0 * entries.len() as f64 + 8.0, 10.0, "start", bar_label);
    svg.text(MARGIN_L + layout.cols as f64 * (PANEL_W + GAP_X) / 2.0, h - 6.0, 11.0, "middle", "delta");
    svg.finish()
}

/// Scatter of transformed t against corrected LOCO, one panel per `n`, with
/// the unit-slope reference line and fitted through-origin slopes.
fn parity_figure(points: &[ParityPoint]) -> String {
    let ns: Vec<usize> = points.iter().map(|q| q.n).collect::<BTreeSet<_>>().into_iter().collect();
    let ps: Vec<usize> = points.iter().map(|q| q.p).collect::<BTreeSet<_>>().into_iter().collect();
    let layout = Layout { rows: 1, cols: ns.len() };
    let (w, h) = layout.size();
    let mut svg = Svg::new(w, h + 40.0);
    let overall = through_origin_slope(points);
    svg.text(w / 2.0, 24.0, 14.0, "middle", &format!("LOCO vs transformed t (overall slope {overall:.4})"));
    let facets = facet_slopes(points);

    for (ci, &n) in ns.iter().enumerate() {
        let panel: Vec<&ParityPoint> = points.iter().filter(|q| q.n == n).collect();
        let hi = panel.iter().flat_map(|q| [q.t_transformed, q.loco_corrected]).filter(|v| v.is_finite()).fold(0.0, f64::max);
        let range = padded(0.0, hi);
        let frame = layout.frame(0, ci, range, range);
        let slope = through_origin_slope(&panel.iter().map(|q| **q).collect::<Vec<_>>());
        frame.draw_axes(&mut svg, &format!("n = {n}, slope {slope:.4}"));
        svg.line(frame.sx(0.0), frame.sy(0.0), frame.sx(range.1), frame.sy(range.1), "#000", 1.0, Some("4,3"));
        let stride = panel.len().div_ceil(MAX_SCATTER_POINTS).max(1);
        for (pi, &p) in ps.iter().enumerate() {
            let colour = PALETTE[pi % PALETTE.len()];
            let facet_slope = facets.get(&(p, n)).copied().unwrap_or(f64::NAN);
            svg.open_group(&[
                ("class", "parity".into()),
                ("data-p", p.to_string()),
                ("data-n", n.to_string()),
                ("data-slope", facet_slope.to_string()),
            ]);
            for q in panel.iter().step_by(stride).filter(|q| q.p == p) {
                if frame.contains(q.t_transformed, q.loco_corrected) {
                    svg.circle(frame.sx(q.t_transformed), frame.sy(q.loco_corrected), 1.5, colour);
                }
            }
            svg.close_group();
        }
    }
    let entries: Vec<(&str, String, bool)> =
        ps.iter().enumerate().map(|(pi, p)| (PALETTE[pi % PALETTE.len()], format!("p = {p}"), false)).collect();
    legend(&mut svg, layout.legend_x(), MARGIN_T, &entries);
    svg.text(w / 2.0, h + 10.0, 11.0, "middle", "t * sqrt(resid var / (n - 1))");
    svg.rotated_text(20.0, MARGIN_T + PANEL_H / 2.0, 11.0, "LOCO * sqrt((n - p) / n)");
    svg.finish()
}

/// Bars of the per-cell difference from theory: rows are metrics, columns
/// are sample sizes, bars within a delta are coloured by `p`. Relative
/// differences are shown in percent; metrics without one use the absolute
/// difference.
fn difference_figure(rows: &[&AggRow], metrics: &[Metric], title: &str) -> String {
    let (ps, ns) = axis_values(rows);
    let layout = Layout { rows: metrics.len(), cols: ns.len() };
    let (w, h) = layout.size();
    let mut svg = Svg::new(w, h);
    svg.text(w / 2.0, 24.0, 14.0, "middle", title);
    let deltas: Vec<f64> = {
        let mut d: Vec<f64> = rows.iter().map(|r| r.delta).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    };
    let slot = 1.0 / deltas.len().max(1) as f64;
    let bar_w = slot * 0.8 / ps.len().max(1) as f64;

    for (ri, metric) in metrics.iter().enumerate() {
        let of_metric: Vec<&AggRow> = rows.iter().copied().filter(|r| r.metric == *metric).collect();
        let relative = of_metric.iter().any(|r| r.rel_diff.is_some());
        let value = |r: &AggRow| if relative { r.rel_diff.map(|v| 100.0 * v) } else { r.abs_diff };
        for (ci, &n) in ns.iter().enumerate() {
            let facet: Vec<&AggRow> = of_metric.iter().copied().filter(|r| r.n == n).collect();
            let vals: Vec<f64> = facet.iter().filter_map(|r| value(r)).filter(|v| v.is_finite()).collect();
            let lo = vals.iter().copied().fold(0.0, f64::min);
            let hi = vals.iter().copied().fold(0.0, f64::max);
            let frame = layout.frame(ri, ci, (0.0, 1.0), padded(lo, hi));
            let unit = if relative { "% rel. diff" } else { "abs. diff" };
            frame.draw_axes(&mut svg, &format!("{} {unit}, n = {n}", metric.as_str()));
            svg.line(frame.left, frame.sy(0.0), frame.left + frame.width, frame.sy(0.0), "#000", 0.8, None);
            for (di, &delta) in deltas.iter().enumerate() {
                for (pi, &p) in ps.iter().enumerate() {
                    let Some(v) = facet.iter().find(|r| r.p == p && r.delta == delta).and_then(|r| value(r)) else {
                        continue;
                    };
                    if !v.is_finite() {
                        continue;
                    }
                    let x0 = di as f64 * slot + slot * 0.1 + pi as f64 * bar_w;
                    let (px0, px1) = (frame.sx(x0), frame.sx(x0 + bar_w));
                    let (y0, y1) = (frame.sy(0.0), frame.sy(v));
                    svg.rect(px0, y0.min(y1), px1 - px0, (y1 - y0).abs(), PALETTE[pi % PALETTE.len()], None);
                }
            }
            for (di, delta) in deltas.iter().enumerate() {
                if di % 3 == 0 {
                    let x = frame.sx((di as f64 + 0.5) * slot);
                    svg.text(x, frame.top + frame.height + 26.0, 8.0, "middle", &format!("d={delta}"));
                }
            }
        }
    }
    let entries: Vec<(&str, String, bool)> =
        ps.iter().enumerate().map(|(pi, p)| (PALETTE[pi % PALETTE.len()], format!("p = {p}"), false)).collect();
    legend(&mut svg, layout.legend_x(), MARGIN_T, &entries);
    svg.finish()
}

/// Every figure the inputs support, as `(file name, SVG text)`.
pub fn render_all(inputs: &Inputs, bars: ErrorBars) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut by_model: BTreeMap<ModelKind, Vec<&AggRow>> = BTreeMap::new();
    for r in &inputs.aggregate {
        by_model.entry(r.model).or_default().push(r);
    }
    for (model, rows) in &by_model {
        let importance: Vec<&AggRow> =
            rows.iter().copied().filter(|r| matches!(r.metric, Metric::Pap | Metric::Loco)).collect();
        if !importance.is_empty() {
            let title = format!("{model} model: PaP and LOCO against delta");
            out.push((
                format!("importance_{model}.svg"),
                trend_figure(&importance, &[Metric::Pap, Metric::Loco], &title, bars),
            ));
            let title = format!("{model} model: empirical minus theoretical importance");
            out.push((format!("differences_{model}.svg"), difference_figure(&importance, &[Metric::Pap, Metric::Loco], &title)));
        }
        let c: Vec<&AggRow> = rows.iter().copied().filter(|r| r.metric == Metric::CHat).collect();
        if !c.is_empty() {
            let title = format!("{model} model: absorption coefficient against delta");
            out.push((format!("absorption_{model}.svg"), trend_figure(&c, &[Metric::CHat], &title, bars)));
        }
    }
    if !inputs.parity.is_empty() {
        out.push(("parity.svg".into(), parity_figure(&inputs.parity)));
    }
    out
}
