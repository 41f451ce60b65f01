//! SVG figures rendered from the CSV outputs. Plot failures are reported but
//! never touch the CSVs they read.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};

use super::log::{read_step_log, read_trajectory};

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Config(format!("plot rendering failed: {e}"))
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Image-plane error `x_c`, `y_c` against frame index.
pub fn plot_error_vs_time(steps_csv: &Path, out: &Path) -> Result<()> {
    let rows = read_step_log(steps_csv)?;
    let root = SVGBackend::new(out, (1000, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let n = rows.len().max(1) as u64;
    let mut chart = ChartBuilder::on(&root)
        .caption("image-plane error", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(45)
        .build_cartesian_2d(0u64..n, -1.1f64..1.1f64)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("frame").y_desc("normalized offset").draw().map_err(plot_err)?;
    let held = |f: fn(&super::LogRow) -> f64| {
        rows.iter()
            .enumerate()
            .filter(|(_, r)| !r.lost)
            .map(move |(i, r)| (i as u64, f(r)))
            .collect::<Vec<_>>()
    };
    chart
        .draw_series(held(|r| r.x_c).into_iter().map(|p| Circle::new(p, 1, BLUE.filled())))
        .map_err(plot_err)?
        .label("x_c")
        .legend(|(x, y)| Circle::new((x, y), 3, BLUE.filled()));
    chart
        .draw_series(held(|r| r.y_c).into_iter().map(|p| Circle::new(p, 1, RED.filled())))
        .map_err(plot_err)?
        .label("y_c")
        .legend(|(x, y)| Circle::new((x, y), 3, RED.filled()));
    chart.configure_series_labels().border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Mean immediate reward per sequential trial from a study-2 curve CSV
/// (`trial,controller,axis,mean,std`).
pub fn plot_reward_vs_trial(curve_csv: &Path, out: &Path) -> Result<()> {
    let mut r = csv::Reader::from_path(curve_csv)?;
    let mut series: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
    for rec in r.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("").to_string();
        let trial: f64 = get(0).parse().map_err(plot_err)?;
        let mean: f64 = get(3).parse().map_err(plot_err)?;
        series.entry(format!("{} {}", get(1), get(2))).or_default().push((trial, mean));
    }
    let (x0, x1) = bounds(series.values().flatten().map(|p| p.0));
    let (y0, y1) = bounds(series.values().flatten().map(|p| p.1));
    let root = SVGBackend::new(out, (900, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("mean immediate reward per trial", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(45)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("trial").y_desc("reward").draw().map_err(plot_err)?;
    for (i, (name, pts)) in series.into_iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 15, y)], color));
    }
    chart.configure_series_labels().border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Robot and target paths in 3D.
pub fn plot_trajectory(trajectory_csv: &Path, out: &Path) -> Result<()> {
    let rows = read_trajectory(trajectory_csv)?;
    let all = || rows.iter().flat_map(|r| [r.robot, r.target]);
    let (x0, x1) = bounds(all().map(|p| p[0]));
    let (y0, y1) = bounds(all().map(|p| p[1]));
    let (z0, z1) = bounds(all().map(|p| p[2]));
    let root = SVGBackend::new(out, (800, 700)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("robot and target paths", ("sans-serif", 20))
        .margin(10)
        .build_cartesian_3d(x0..x1, z0..z1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_axes().draw().map_err(plot_err)?;
    let stride = (rows.len() / 4000).max(1);
    for (name, color, pick) in [("robot", BLUE, 0usize), ("target", RED, 1)] {
        let pts: Vec<(f64, f64, f64)> = rows
            .iter()
            .step_by(stride)
            .map(|r| if pick == 0 { r.robot } else { r.target })
            .map(|p| (p[0], p[2], p[1]))
            .collect();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 15, y)], color));
    }
    chart.configure_series_labels().border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Render every figure that can be made from the CSVs in `dir` into
/// `dir/plots`. Returns the written files; individual failures are collected
/// as messages instead of aborting.
pub fn emit_plots(dir: &Path) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let out_dir = dir.join("plots");
    std::fs::create_dir_all(&out_dir)?;
    let mut written = Vec::new();
    let mut failures = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for path in entries {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let job: Option<(String, fn(&Path, &Path) -> Result<()>)> = if let Some(stem) = name.strip_suffix("_steps.csv") {
            Some((format!("{stem}_error.svg"), plot_error_vs_time))
        } else if let Some(stem) = name.strip_suffix("_trajectory.csv") {
            Some((format!("{stem}_trajectory.svg"), plot_trajectory))
        } else if let Some(stem) = name.strip_suffix("_curve.csv") {
            Some((format!("{stem}_reward.svg"), plot_reward_vs_trial))
        } else {
            None
        };
        if let Some((file, render)) = job {
            let target = out_dir.join(file);
            match render(&path, &target) {
                Ok(()) => written.push(target),
                Err(e) => failures.push(format!("{name}: {e}")),
            }
        }
    }
    Ok((written, failures))
}
