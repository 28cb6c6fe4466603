use std::path::Path;

use depthvo_core::metrics::{format_metrics_csv, MetricsRow};
use depthvo_core::Trajectory;

use super::map::{build, MapParams};
use super::{eval, sim, vo};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::svg::{trajectory_plot, Series};

/// sim -> vo (filter off and on) -> eval -> map. Returns the printed table.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<String> {
    let seq = out.join("seq");
    let manifest = sim::generate(cfg, &seq)?;
    log::info!("sequence at {}", manifest.display());

    let mut off_cfg = cfg.clone();
    off_cfg.vo.filter.enabled = false;
    let mut on_cfg = cfg.clone();
    on_cfg.vo.filter.enabled = true;
    let (run_off, run_on) = (out.join("run_off"), out.join("run_on"));
    let off = vo::run(&seq, &off_cfg, &run_off)?;
    let on = vo::run(&seq, &on_cfg, &run_on)?;

    let eval_dir = out.join("eval");
    std::fs::create_dir_all(&eval_dir).map_err(|e| CliError::io(&eval_dir, e))?;
    let gt = seq.join(depthvo_core::sim::export::GROUND_TRUTH_FILE);
    let (ate_off, _) = eval::ate(&run_off.join(crate::rundir::TRAJECTORY), &gt, true, Some(&eval_dir.join("ate_filter_off.svg")))?;
    let (ate_on, _) = eval::ate(&run_on.join(crate::rundir::TRAJECTORY), &gt, true, Some(&eval_dir.join("ate_filter_on.svg")))?;
    write_overlay(&eval_dir.join("trajectories.svg"), &gt, &run_off, &run_on)?;

    let filter = eval::filter(&run_on)?;
    let depth = eval::depth_run(&run_on, &seq, true)?;
    let depth_mean = depth.last().expect("mean row").1;
    let rows = [
        MetricsRow { run: "filter_off".into(), ate_rmse: Some(ate_off), ..Default::default() },
        MetricsRow { run: "filter_on".into(), ate_rmse: Some(ate_on), depth: Some(depth_mean), ..filter.clone() },
    ];
    write_text(&eval_dir.join("metrics.csv"), &format_metrics_csv(&rows))?;
    write_text(&eval_dir.join("depth.csv"), &format_metrics_csv(&eval::depth_rows(&depth)))?;

    let params = MapParams { delta: cfg.mapping.delta, gamma: cfg.mapping.gamma, voxel: cfg.mapping.voxel };
    let (cloud, map_rows) = build(&run_on, params, &out.join("map").join("cloud.ply"))?;
    let (pixels, passed) = map_rows.iter().fold((0, 0), |(p, q), r| (p + r.pixels, q + r.passed));

    let mut t = String::new();
    t.push_str(&format!("{:<34} {:>12} {:>12}\n", "", "filter off", "filter on"));
    t.push_str(&format!("{:<34} {:>12.6} {:>12.6}\n", "ATE RMSE (Sim3 aligned)", ate_off, ate_on));
    t.push_str(&format!("{:<34} {:>12} {:>12}\n", "map points created", off.map_points_created, on.map_points_created));
    t.push_str(&format!("{:<34} {:>12} {:>12}\n", "map points removed", off.map_points_removed, on.map_points_removed));
    t.push_str(&format!("{:<34} {:>12} {:>12.6}\n", "removal precision", "-", on.precision));
    t.push_str(&format!("{:<34} {:>12} {:>12.6}\n", "corrupted-point recall", "-", on.recall));
    t.push_str(&format!("{:<34} {:>12} {:>12.6}\n", "false-removal rate", "-", on.false_removal_rate));
    t.push_str(&format!("{:<34} {:>12} {:>12.6}\n", "keyframe depth abs_rel", "-", depth_mean.abs_rel));
    t.push_str(&format!("{:<34} {:>12} {:>12.6}\n", "keyframe depth delta1", "-", depth_mean.delta1));
    let rate = if pixels == 0 { 0.0 } else { passed as f64 / pixels as f64 };
    t.push_str(&format!("{:<34} {:>12} {:>12.6}\n", "mapping pass rate", "-", rate));
    t.push_str(&format!("{:<34} {:>12} {:>12}\n", "fused points", "-", cloud.len()));
    let verdict = if ate_on < ate_off { "yes" } else { "no" };
    t.push_str(&format!("filter-on ATE lower than filter-off: {verdict}\n"));
    Ok(t)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_overlay(path: &Path, gt: &Path, off: &Path, on: &Path) -> Result<()> {
    let read = |p: &Path| Trajectory::read_tum(p).map_err(|e| CliError::io(p, e));
    let gt = read(gt)?;
    let aligned = |run: &Path| -> Result<Vec<depthvo_core::Vec3>> {
        let est = read(&run.join(crate::rundir::TRAJECTORY))?;
        let (e, g) = depthvo_core::metrics::associated_centers(&est, &gt).map_err(|e| CliError::Check(e.to_string()))?;
        let sim = depthvo_core::geometry::umeyama_least_squares(&e, &g).map_err(|e| CliError::Check(e.to_string()))?;
        Ok(e.iter().map(|p| sim.apply(p)).collect())
    };
    let (e_off, e_on) = (aligned(off)?, aligned(on)?);
    let g: Vec<_> = gt.positions();
    let plot = trajectory_plot(
        "Top-down trajectories (Sim3 aligned)",
        &[
            Series { label: "ground truth", color: "black", points: &g },
            Series { label: "filter off", color: "#1f77b4", points: &e_off },
            Series { label: "filter on", color: "#d62728", points: &e_on },
        ],
    );
    write_text(path, &plot)
}
