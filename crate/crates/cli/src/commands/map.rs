use std::path::{Path, PathBuf};

use depthvo_core::io::write_ply;
use depthvo_core::mapping::{consistency_check, format_summary, fuse_keyframe, MappingFrame, MappingSummaryRow};
use depthvo_core::PointCloud;

use crate::error::{CliError, Result};
use crate::rundir::RunDir;

#[derive(Debug, Clone, Copy)]
pub struct MapParams {
    pub delta: f64,
    pub gamma: f64,
    pub voxel: f64,
}

/// Pass-rate CSV written next to the cloud: `cloud.ply` gets `cloud_pass_rate.csv`.
pub fn pass_rate_path(cloud: &Path) -> PathBuf {
    let stem = cloud.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    cloud.with_file_name(format!("{stem}_pass_rate.csv"))
}

/// Checks each keyframe against the previous one and fuses the passing pixels.
pub fn build(run_dir: &Path, params: MapParams, out: &Path) -> Result<(PointCloud, Vec<MappingSummaryRow>)> {
    for (name, v) in [("delta", params.delta), ("gamma", params.gamma), ("voxel", params.voxel)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CliError::Config(format!("{name} must be a non-negative number")));
        }
    }
    let run = RunDir::new(run_dir);
    let index = run.keyframes()?;
    let k = index.intrinsics;
    let with_depth: Vec<_> = index.keyframes.iter().filter(|kf| kf.depth.is_some()).collect();
    if with_depth.len() < 2 {
        return Err(CliError::Io(format!("{}: fewer than two keyframes with depth maps", run_dir.display())));
    }
    let mut cloud = PointCloud::new(true);
    let mut rows = Vec::new();
    for pair in with_depth.windows(2) {
        let (prev, cur) = (pair[0], pair[1]);
        let (d1, d2) = (run.depth(prev.depth.as_deref().expect("filtered"))?, run.depth(cur.depth.as_deref().expect("filtered"))?);
        let (i1, i2) = (run.intensity(&prev.intensity)?, run.intensity(&cur.intensity)?);
        let (p1, p2) = (prev.pose()?, cur.pose()?);
        let f2 = MappingFrame { pose: &p2, depth: &d2, image: &i2 };
        let f1 = MappingFrame { pose: &p1, depth: &d1, image: &i1 };
        let mask = consistency_check(&f2, &f1, &k, params.delta, params.gamma).map_err(|e| CliError::Io(e.to_string()))?;
        let fused = fuse_keyframe(&mut cloud, &p2, &d2, &mask, &k, Some(&i2), params.voxel).map_err(|e| CliError::Io(e.to_string()))?;
        rows.push(MappingSummaryRow { kf_id: cur.index, pixels: d2.count_valid(), passed: mask.count(), fused });
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    write_ply(out, &cloud).map_err(|e| CliError::Io(e.to_string()))?;
    let csv = pass_rate_path(out);
    std::fs::write(&csv, format_summary(&rows)).map_err(|e| CliError::io(&csv, e))?;
    Ok((cloud, rows))
}
