//! `plot`: static SVG figures from a trace CSV.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use hgo_gp::scenario::Obstacle;
use hgo_gp::{ScenarioConfig, TraceRow};
use log::{info, warn};
use plotters::coord::Shift;
use plotters::prelude::*;

use crate::manifest::RunManifest;
use crate::trace_io::read_trace_file;
use crate::CliError;

/// Rows drawn per series; longer traces are decimated with a fixed stride.
pub const MAX_POINTS: usize = 4000;

const SIZE: (u32, u32) = (960, 640);
const PALETTE: [RGBColor; 4] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
];

/// Paths of the three figures produced for `trace`.
pub fn figure_paths(trace: &Path, out_dir: &Path) -> [PathBuf; 3] {
    let stem = trace
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    ["trajectory", "estimates", "errors"].map(|kind| out_dir.join(format!("{stem}_{kind}.svg")))
}

/// Reads `trace` and writes the trajectory, estimate and error figures into
/// `out_dir`. Obstacles come from the manifest written next to the trace by
/// `run`, falling back to the default scene.
pub fn cmd_plot(trace: &Path, out_dir: &Path) -> Result<[PathBuf; 3], CliError> {
    let rows = read_trace_file(trace)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::failure(format!("cannot create {}: {e}", out_dir.display())))?;
    let obstacles = obstacles_for(trace);
    // window events are sparse, so take them before decimating
    let samples: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.window_event == 1)
        .map(|r| (r.p_x, r.p_y))
        .collect();
    let rows = decimate(&rows, MAX_POINTS);
    let paths = figure_paths(trace, out_dir);
    let draw_err = |path: &Path, e: String| CliError::failure(format!("cannot draw {}: {e}", path.display()));

    trajectory_figure(&paths[0], &rows, &samples, &obstacles).map_err(|e| draw_err(&paths[0], e))?;
    time_figure(
        &paths[1],
        &rows,
        "Lie derivative estimates",
        "L_f h_s",
        &[
            ("true L_f h_s", |r| r.lf_hs_true),
            ("GP on observer derivative", |r| r.gp_h1_mean),
            ("baseline grad(GP) f", |r| r.baseline_lf_gph),
            ("observer zhat2", |r| r.zhat2),
        ],
    )
    .map_err(|e| draw_err(&paths[1], e))?;
    time_figure(
        &paths[2],
        &rows,
        "Estimation error",
        "error",
        &[
            ("GP on observer derivative", |r| r.err_h1),
            ("baseline grad(GP) f", |r| r.err_baseline),
        ],
    )
    .map_err(|e| draw_err(&paths[2], e))?;
    for p in &paths {
        info!("wrote {}", p.display());
    }
    Ok(paths)
}

fn obstacles_for(trace: &Path) -> Vec<Obstacle> {
    let manifest = trace.file_name().and_then(|name| {
        let name = name.to_string_lossy();
        let stem = name.strip_suffix(".csv")?;
        let id = stem.strip_prefix("trace_")?;
        Some(trace.with_file_name(format!("manifest_{id}.json")))
    });
    if let Some(path) = manifest.filter(|p| p.exists()) {
        match fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<RunManifest>(&t).map_err(|e| e.to_string()))
        {
            Ok(m) => return m.effective_config.scenario.obstacles,
            Err(e) => warn!("ignoring unreadable manifest {}: {e}", path.display()),
        }
    } else {
        warn!("no manifest next to {}; drawing the default obstacles", trace.display());
    }
    ScenarioConfig::default().scenario.obstacles
}

/// Every `stride`-th row plus the last one.
pub fn decimate(rows: &[TraceRow], max_points: usize) -> Vec<TraceRow> {
    let stride = rows.len().div_ceil(max_points.max(1)).max(1);
    let mut out: Vec<TraceRow> = rows.iter().step_by(stride).copied().collect();
    if let Some(last) = rows.last() {
        if out.last() != Some(last) {
            out.push(*last);
        }
    }
    out
}

/// Range covering `values` with a margin; degenerate spans get a unit width.
fn padded(values: impl Iterator<Item = f64>) -> Range<f64> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return -1.0..1.0;
    }
    let span = hi - lo;
    let pad = if span > 0.0 { 0.05 * span } else { 0.5_f64.max(0.05 * lo.abs()) };
    (lo - pad)..(hi + pad)
}

fn err_string<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn trajectory_figure(
    path: &Path,
    rows: &[TraceRow],
    samples: &[(f64, f64)],
    obstacles: &[Obstacle],
) -> Result<(), String> {
    let xs = rows.iter().map(|r| r.p_x).chain(obstacles.iter().flat_map(|o| [o.center[0] - o.radius, o.center[0] + o.radius]));
    let ys = rows.iter().map(|r| r.p_y).chain(obstacles.iter().flat_map(|o| [o.center[1] - o.radius, o.center[1] + o.radius]));
    let (mut xr, mut yr) = (padded(xs), padded(ys));
    // equal scale on both axes so discs stay round
    let (w, h) = (SIZE.0 as f64 - 80.0, SIZE.1 as f64 - 80.0);
    let per_px = ((xr.end - xr.start) / w).max((yr.end - yr.start) / h);
    let grow = |r: &mut Range<f64>, px: f64| {
        let mid = 0.5 * (r.start + r.end);
        *r = (mid - 0.5 * per_px * px)..(mid + 0.5 * per_px * px);
    };
    grow(&mut xr, w);
    grow(&mut yr, h);

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(err_string)?;
    let mut chart = chart_on(&root, "Agent path", xr, yr)?;
    chart
        .configure_mesh()
        .x_desc("p_x")
        .y_desc("p_y")
        .draw()
        .map_err(err_string)?;

    for o in obstacles {
        let outline: Vec<(f64, f64)> = (0..=96)
            .map(|k| {
                let a = k as f64 / 96.0 * std::f64::consts::TAU;
                (o.center[0] + o.radius * a.cos(), o.center[1] + o.radius * a.sin())
            })
            .collect();
        chart
            .draw_series(std::iter::once(Polygon::new(outline, RGBColor(120, 120, 120).mix(0.4).filled())))
            .map_err(err_string)?;
    }
    let color = PALETTE[0];
    chart
        .draw_series(LineSeries::new(rows.iter().map(|r| (r.p_x, r.p_y)), color.stroke_width(2)))
        .map_err(err_string)?
        .label("agent")
        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    let accent = PALETTE[1];
    chart
        .draw_series(
            samples.iter().map(|p| Circle::new(*p, 3, accent.filled())),
        )
        .map_err(err_string)?
        .label("window samples")
        .legend(move |(x, y)| Circle::new((x + 10, y), 3, accent.filled()));
    if rows.len() == 1 {
        let r = rows[0];
        chart
            .draw_series(std::iter::once(Circle::new((r.p_x, r.p_y), 4, color.filled())))
            .map_err(err_string)?;
    }
    legend(&mut chart)?;
    root.present().map_err(err_string)
}

type Column = fn(&TraceRow) -> f64;

fn time_figure(
    path: &Path,
    rows: &[TraceRow],
    caption: &str,
    y_desc: &str,
    series: &[(&str, Column)],
) -> Result<(), String> {
    let xr = padded(rows.iter().map(|r| r.t));
    let yr = padded(series.iter().flat_map(|(_, f)| rows.iter().map(f)));
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(err_string)?;
    let mut chart = chart_on(&root, caption, xr, yr)?;
    chart
        .configure_mesh()
        .x_desc("t [s]")
        .y_desc(y_desc)
        .draw()
        .map_err(err_string)?;
    for (k, (label, f)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let anno = if rows.len() == 1 {
            chart
                .draw_series(rows.iter().map(|r| Circle::new((r.t, f(r)), 4, color.filled())))
                .map_err(err_string)?
        } else {
            chart
                .draw_series(LineSeries::new(rows.iter().map(|r| (r.t, f(r))), color.stroke_width(1)))
                .map_err(err_string)?
        };
        anno.label(*label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    legend(&mut chart)?;
    root.present().map_err(err_string)
}

type Chart<'a, 'b> = ChartContext<'a, SVGBackend<'b>, Cartesian2d<plotters::coord::types::RangedCoordf64, plotters::coord::types::RangedCoordf64>>;

fn chart_on<'a, 'b>(
    root: &'a DrawingArea<SVGBackend<'b>, Shift>,
    caption: &str,
    xr: Range<f64>,
    yr: Range<f64>,
) -> Result<Chart<'a, 'b>, String> {
    ChartBuilder::on(root)
        .caption(caption, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(xr, yr)
        .map_err(err_string)
}

fn legend<'a, 'b: 'a>(chart: &mut Chart<'a, 'b>) -> Result<(), String> {
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperRight)
        .draw()
        .map_err(err_string)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimation_keeps_endpoints_and_limit() {
        let rows: Vec<TraceRow> = (0..10_001)
            .map(|i| TraceRow {
                t: i as f64,
                ..Default::default()
            })
            .collect();
        let d = decimate(&rows, 4000);
        assert!(d.len() <= 4001);
        assert_eq!(d[0].t, 0.0);
        assert_eq!(d.last().unwrap().t, 10_000.0);
        assert_eq!(decimate(&rows[..3], 4000).len(), 3);
    }

    #[test]
    fn padding_handles_degenerate_ranges() {
        assert_eq!(padded([2.0].into_iter()), 1.5..2.5);
        let r = padded([0.0, 10.0].into_iter());
        assert!(r.start < 0.0 && r.end > 10.0);
        assert_eq!(padded(std::iter::empty()), -1.0..1.0);
    }
}
