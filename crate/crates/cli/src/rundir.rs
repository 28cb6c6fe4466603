//! Layout of a `vo run` output directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use depthvo_core::geometry::Mat3;
use depthvo_core::io::{read_depth, read_intensity_pgm};
use depthvo_core::{CameraIntrinsics, DepthMap, GrayImage, MapPointId, PoseSE3, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TRAJECTORY: &str = "trajectory.txt";
pub const REMOVALS: &str = "removals.csv";
pub const MAP_POINTS: &str = "map_points.csv";
pub const KEYFRAMES: &str = "keyframes.json";
pub const SUMMARY: &str = "summary.json";
pub const KEYFRAME_DIR: &str = "keyframes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeRecord {
    pub index: usize,
    pub frame_id: usize,
    pub timestamp: f64,
    /// World-to-camera rotation, row-major.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub theta_s: Option<f64>,
    /// Depth stem relative to the run directory, when the keyframe has a dense depth map.
    pub depth: Option<String>,
    pub intensity: String,
}

impl KeyframeRecord {
    pub fn pose(&self) -> Result<PoseSE3> {
        let r = Mat3::from_row_slice(&self.rotation);
        PoseSE3::new(r, Vec3::from(self.translation))
            .map_err(|e| CliError::Io(format!("keyframe {}: {e}", self.index)))
    }
}

pub fn pose_fields(pose: &PoseSE3) -> ([f64; 9], [f64; 3]) {
    let r = pose.rotation();
    let mut rot = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            rot[3 * i + j] = r[(i, j)];
        }
    }
    let t = pose.translation();
    (rot, [t.x, t.y, t.z])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeIndex {
    pub intrinsics: CameraIntrinsics,
    pub keyframes: Vec<KeyframeRecord>,
}

/// Per-map-point labels: created points, the corrupted subset and removals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointLabels {
    pub created: BTreeSet<MapPointId>,
    pub corrupted: BTreeSet<MapPointId>,
    pub removed: BTreeSet<MapPointId>,
}

pub fn format_point_labels(labels: &PointLabels, removed_at: impl Fn(MapPointId) -> Option<usize>) -> String {
    let mut out = String::from("map_point_id,corrupted,removed_at_frame\n");
    for id in &labels.created {
        let at = removed_at(*id).map(|f| f.to_string()).unwrap_or_default();
        out.push_str(&format!("{id},{},{at}\n", labels.corrupted.contains(id) as u8));
    }
    out
}

pub fn parse_point_labels(text: &str, origin: &Path) -> Result<PointLabels> {
    let bad = |line: usize, m: &str| CliError::Io(format!("{}:{line}: {m}", origin.display()));
    let mut labels = PointLabels::default();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(bad(i + 1, "expected 3 columns"));
        }
        let id = MapPointId(cols[0].parse().map_err(|_| bad(i + 1, "bad map point id"))?);
        labels.created.insert(id);
        match cols[1] {
            "1" => {
                labels.corrupted.insert(id);
            }
            "0" => {}
            _ => return Err(bad(i + 1, "corrupted must be 0 or 1")),
        }
        if !cols[2].is_empty() {
            labels.removed.insert(id);
        }
    }
    Ok(labels)
}

/// Read access to a finished run.
pub struct RunDir {
    pub dir: PathBuf,
}

impl RunDir {
    pub fn new(dir: &Path) -> Self {
        RunDir { dir: dir.to_path_buf() }
    }

    fn read(&self, name: &str) -> Result<String> {
        let path = self.dir.join(name);
        std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))
    }

    pub fn keyframes(&self) -> Result<KeyframeIndex> {
        let text = self.read(KEYFRAMES)?;
        serde_json::from_str(&text).map_err(|e| CliError::io(&self.dir.join(KEYFRAMES), e))
    }

    pub fn labels(&self) -> Result<PointLabels> {
        parse_point_labels(&self.read(MAP_POINTS)?, &self.dir.join(MAP_POINTS))
    }

    pub fn depth(&self, stem: &str) -> Result<DepthMap> {
        let path = self.dir.join(stem);
        read_depth(&path).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn intensity(&self, rel: &str) -> Result<GrayImage> {
        read_intensity_pgm(&self.dir.join(rel)).map_err(|e| CliError::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        let labels = PointLabels {
            created: [1, 2, 5, 9].map(MapPointId).into(),
            corrupted: [2, 9].map(MapPointId).into(),
            removed: [2, 5].map(MapPointId).into(),
        };
        let text = format_point_labels(&labels, |id| labels.removed.contains(&id).then_some(id.0 as usize * 10));
        assert!(text.contains("\n5,0,50\n"));
        assert_eq!(parse_point_labels(&text, Path::new("x")).unwrap(), labels);
    }

    #[test]
    fn pose_fields_round_trip() {
        let pose = PoseSE3::from_axis_angle(Vec3::new(0.1, -0.2, 0.3), Vec3::new(1.0, 2.0, 3.0));
        let (rotation, translation) = pose_fields(&pose);
        let rec = KeyframeRecord {
            index: 0,
            frame_id: 0,
            timestamp: 0.0,
            rotation,
            translation,
            theta_s: None,
            depth: None,
            intensity: String::new(),
        };
        assert_eq!(rec.pose().unwrap(), pose);
    }
}
