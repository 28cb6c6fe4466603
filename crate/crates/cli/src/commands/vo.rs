use std::collections::BTreeMap;
use std::path::Path;

use depthvo_core::io::write_depth;
use depthvo_core::metrics::{ate_rmse, false_removal_rate, filter_score};
use depthvo_core::nearfar::{SigmaPolicy, FILTER_LOG_HEADER};
use depthvo_core::provider::directory_oracle;
use depthvo_core::sim::export::{depth_stem, intensity_path};
use depthvo_core::sim::SequenceDir;
use depthvo_core::vo::{track_sequence, RunStatus, SequenceInput, VoError, VoRun};
use depthvo_core::{MapPointId, TrackId};
use serde::Serialize;

use super::sim::CONFIG_COPY;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::rundir::{
    format_point_labels, pose_fields, KeyframeIndex, KeyframeRecord, PointLabels, KEYFRAMES, KEYFRAME_DIR, MAP_POINTS,
    REMOVALS, SUMMARY, TRAJECTORY,
};

#[derive(Debug, Serialize)]
pub struct Summary {
    #[serde(flatten)]
    pub status: RunStatus,
    pub filter_enabled: bool,
    pub sigma: SigmaPolicy,
    pub frames: usize,
    pub tracked_frames: usize,
    pub init_frame: usize,
    pub keyframes: usize,
    pub map_points_created: usize,
    pub map_points_corrupted: usize,
    pub map_points_removed: usize,
    pub precision: f64,
    pub recall: f64,
    pub false_removal_rate: f64,
    /// 7DoF-aligned ATE against the sequence's ground truth.
    pub ate_rmse: Option<f64>,
}

/// Config for a run on `seq`: explicit file, else the copy `sim generate` left, else defaults.
pub fn resolve_config(seq: &Path, explicit: Option<&Path>) -> Result<RunConfig> {
    match explicit {
        Some(p) => RunConfig::load(p),
        None if seq.join(CONFIG_COPY).exists() => RunConfig::load(&seq.join(CONFIG_COPY)),
        None => Ok(RunConfig::default()),
    }
}

pub fn run(seq_dir: &Path, cfg: &RunConfig, out: &Path) -> Result<Summary> {
    let seq = SequenceDir::open(seq_dir).map_err(|e| CliError::Io(e.to_string()))?;
    let m = &seq.manifest;
    let corruption: BTreeMap<TrackId, f64> = m.corruption.iter().map(|c| (c.landmark_id, c.factor)).collect();
    let input = SequenceInput { frames: &m.frames, intrinsics: m.intrinsics, corruption: &corruption };
    let provider = directory_oracle(seq_dir, depth_stem, cfg.provider).map_err(|e| CliError::Config(e.to_string()))?;
    let run = match track_sequence(&input, &provider, &cfg.vo) {
        Ok(run) => run,
        Err(VoError::Provider(e)) => return Err(CliError::Io(e.to_string())),
        Err(VoError::TooFewFrames) => return Err(CliError::Config("sequence needs at least 2 frames".into())),
        Err(e @ VoError::Initialization(_)) => return Err(CliError::TrackingLost { frame: 0, reason: e.to_string() }),
    };
    let summary = write_outputs(&seq, &run, cfg, out)?;
    if let RunStatus::TrackingLost { frame, reason } = &run.status {
        return Err(CliError::TrackingLost { frame: *frame, reason: reason.clone() });
    }
    Ok(summary)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_outputs(seq: &SequenceDir, run: &VoRun, cfg: &RunConfig, out: &Path) -> Result<Summary> {
    let kf_dir = out.join(KEYFRAME_DIR);
    std::fs::create_dir_all(&kf_dir).map_err(|e| CliError::io(&kf_dir, e))?;
    run.trajectory.write_tum(out.join(TRAJECTORY)).map_err(|e| CliError::io(&out.join(TRAJECTORY), e))?;

    let mut log = String::from(FILTER_LOG_HEADER);
    log.push('\n');
    for r in &run.filter_log {
        log.push_str(&format!("{},{},{:.9},{:.9},{},{}\n", r.frame_id, r.map_point_id, r.z_vo, r.z_pred, r.lambda, r.removed as u8));
    }
    write(&out.join(REMOVALS), &log)?;

    let removed_at: BTreeMap<MapPointId, usize> =
        run.removals.iter().flat_map(|(frame, ids)| ids.iter().map(move |id| (*id, *frame))).collect();
    let labels = PointLabels { created: run.created.clone(), corrupted: run.corrupted.clone(), removed: run.removed() };
    write(&out.join(MAP_POINTS), &format_point_labels(&labels, |id| removed_at.get(&id).copied()))?;

    let mut records = Vec::with_capacity(run.keyframes.len());
    for kf in &run.keyframes {
        let name = format!("{KEYFRAME_DIR}/{:06}", kf.frame_id);
        let depth = match &kf.depth {
            Some(d) => {
                write_depth(&out.join(&name), d).map_err(|e| CliError::Io(e.to_string()))?;
                Some(name.clone())
            }
            None => None,
        };
        let intensity = format!("{name}.pgm");
        let src = intensity_path(&seq.dir, kf.frame_id);
        std::fs::copy(&src, out.join(&intensity)).map_err(|e| CliError::io(&src, e))?;
        let (rotation, translation) = pose_fields(&kf.pose);
        records.push(KeyframeRecord {
            index: kf.index,
            frame_id: kf.frame_id,
            timestamp: kf.timestamp,
            rotation,
            translation,
            theta_s: kf.scale.map(|s| s.theta_s),
            depth,
            intensity,
        });
    }
    let index = KeyframeIndex { intrinsics: seq.manifest.intrinsics, keyframes: records };
    write(&out.join(KEYFRAMES), &(serde_json::to_string_pretty(&index).expect("keyframes serialize") + "\n"))?;

    let score = filter_score(&labels.removed, &labels.corrupted);
    let summary = Summary {
        status: run.status.clone(),
        filter_enabled: cfg.vo.filter.enabled,
        sigma: cfg.vo.filter.sigma,
        frames: seq.manifest.frames.len(),
        tracked_frames: run.trajectory.len(),
        init_frame: run.init_frame,
        keyframes: run.keyframes.len(),
        map_points_created: labels.created.len(),
        map_points_corrupted: labels.corrupted.len(),
        map_points_removed: labels.removed.len(),
        precision: score.precision,
        recall: score.recall,
        false_removal_rate: false_removal_rate(&labels.removed, &labels.corrupted, &labels.created),
        ate_rmse: ate_rmse(&run.trajectory, &seq.ground_truth, true).ok(),
    };
    write(&out.join(SUMMARY), &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
    Ok(summary)
}
