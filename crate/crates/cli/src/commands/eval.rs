use std::path::Path;

use depthvo_core::geometry::umeyama_least_squares;
use depthvo_core::io::read_depth;
use depthvo_core::metrics::{
    associated_centers, ate_rmse, depth_metrics, false_removal_rate, filter_score, format_metrics_csv, DepthMetrics, MetricsRow,
};
use depthvo_core::sim::export::depth_stem;
use depthvo_core::{DepthMap, Trajectory};

use crate::error::{CliError, Result};
use crate::rundir::RunDir;
use crate::svg::{trajectory_plot, Series};

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_tum(path: &Path) -> Result<Trajectory> {
    Trajectory::read_tum(path).map_err(|e| CliError::io(path, e))
}

pub fn write_csv(path: Option<&Path>, rows: &[MetricsRow]) -> Result<()> {
    match path {
        Some(p) => write(p, &format_metrics_csv(rows)),
        None => Ok(()),
    }
}

/// Returns the ATE and the metric table.
pub fn ate(est_path: &Path, gt_path: &Path, align: bool, svg: Option<&Path>) -> Result<(f64, String)> {
    let (est, gt) = (read_tum(est_path)?, read_tum(gt_path)?);
    let value = ate_rmse(&est, &gt, align).map_err(|e| CliError::Check(e.to_string()))?;
    if let Some(svg) = svg {
        let (e, g) = associated_centers(&est, &gt).map_err(|e| CliError::Check(e.to_string()))?;
        let e = if align {
            let sim = umeyama_least_squares(&e, &g).map_err(|e| CliError::Check(e.to_string()))?;
            e.iter().map(|p| sim.apply(p)).collect()
        } else {
            e
        };
        let title = format!("ATE RMSE {value:.6}{}", if align { " (Sim3 aligned)" } else { "" });
        let plot = trajectory_plot(
            &title,
            &[Series { label: "ground truth", color: "black", points: &g }, Series { label: "estimate", color: "#d62728", points: &e }],
        );
        write(svg, &plot)?;
    }
    Ok((value, format!("ate_rmse {value:.6}\n")))
}

pub fn depth_table(rows: &[(String, DepthMetrics)]) -> String {
    let mut out = format!("{:<10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n", "frame", "abs_rel", "sq_rel", "rms", "rms_log", "d1", "d2", "d3");
    for (name, m) in rows {
        out.push_str(&format!(
            "{name:<10} {:>9.6} {:>9.6} {:>9.6} {:>9.6} {:>9.6} {:>9.6} {:>9.6}\n",
            m.abs_rel, m.sq_rel, m.rms, m.rms_log, m.delta1, m.delta2, m.delta3
        ));
    }
    out
}

fn mean(rows: &[(String, DepthMetrics)]) -> DepthMetrics {
    let n = rows.len() as f64;
    let avg = |f: fn(&DepthMetrics) -> f64| rows.iter().map(|(_, m)| f(m)).sum::<f64>() / n;
    DepthMetrics {
        abs_rel: avg(|m| m.abs_rel),
        sq_rel: avg(|m| m.sq_rel),
        rms: avg(|m| m.rms),
        rms_log: avg(|m| m.rms_log),
        delta1: avg(|m| m.delta1),
        delta2: avg(|m| m.delta2),
        delta3: avg(|m| m.delta3),
    }
}

fn load_depth(stem: &Path) -> Result<DepthMap> {
    read_depth(stem).map_err(|e| CliError::Io(e.to_string()))
}

/// One depth map against one ground truth, both given as file stems.
pub fn depth_pair(pred: &Path, gt: &Path, scale_recover: bool) -> Result<Vec<(String, DepthMetrics)>> {
    let m = depth_metrics(&load_depth(pred)?, &load_depth(gt)?, scale_recover).map_err(|e| CliError::Check(e.to_string()))?;
    Ok(vec![("pair".into(), m)])
}

/// Every keyframe depth map of a run against the sequence's ground truth, plus a mean row.
pub fn depth_run(run_dir: &Path, seq_dir: &Path, scale_recover: bool) -> Result<Vec<(String, DepthMetrics)>> {
    let run = RunDir::new(run_dir);
    let mut rows = Vec::new();
    for kf in run.keyframes()?.keyframes {
        let Some(stem) = &kf.depth else { continue };
        let pred = run.depth(stem)?;
        let gt = load_depth(&seq_dir.join(depth_stem(kf.frame_id)))?;
        let m = depth_metrics(&pred, &gt, scale_recover).map_err(|e| CliError::Check(format!("frame {}: {e}", kf.frame_id)))?;
        rows.push((format!("{:06}", kf.frame_id), m));
    }
    if rows.is_empty() {
        return Err(CliError::Io(format!("{}: no keyframe depth maps", run_dir.display())));
    }
    let m = mean(&rows);
    rows.push(("mean".into(), m));
    Ok(rows)
}

pub fn depth_rows(rows: &[(String, DepthMetrics)]) -> Vec<MetricsRow> {
    rows.iter().map(|(name, m)| MetricsRow { run: name.clone(), depth: Some(*m), ..Default::default() }).collect()
}

pub fn filter(run_dir: &Path) -> Result<MetricsRow> {
    let labels = RunDir::new(run_dir).labels()?;
    let score = filter_score(&labels.removed, &labels.corrupted);
    Ok(MetricsRow {
        run: run_name(run_dir),
        precision: Some(score.precision),
        recall: Some(score.recall),
        false_removal_rate: Some(false_removal_rate(&labels.removed, &labels.corrupted, &labels.created)),
        ..Default::default()
    })
}

pub fn filter_table(row: &MetricsRow) -> String {
    let f = |v: Option<f64>| v.unwrap_or(f64::NAN);
    format!(
        "precision {:.6}\nrecall {:.6}\nfalse_removal_rate {:.6}\n",
        f(row.precision),
        f(row.recall),
        f(row.false_removal_rate)
    )
}

pub fn run_name(dir: &Path) -> String {
    dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}
