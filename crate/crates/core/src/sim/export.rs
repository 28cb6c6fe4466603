//! Sequence directories: a JSON manifest, a TUM ground-truth file and per-frame
//! depth (PFM plus mask) and intensity (PGM) images.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::render::render;
use super::scene::Scene;
use super::sequence::{CorruptionLabel, Landmark, SequenceSpec, SimSequence};
use crate::frame::Frame;
use crate::geometry::CameraIntrinsics;
use crate::image::GrayImage;
use crate::io::{self, FormatError};
use crate::provider::DirectoryGroundTruth;
use crate::trajectory::{Trajectory, TrajectoryError};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GROUND_TRUTH_FILE: &str = "groundtruth.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub intrinsics: CameraIntrinsics,
    pub scene: Scene,
    pub sequence: SequenceSpec,
    /// Ground-truth trajectory as TUM text.
    pub trajectory_tum: String,
    pub frames: Vec<Frame>,
    pub landmarks: Vec<Landmark>,
    pub corruption: Vec<CorruptionLabel>,
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("manifest version {0} is not supported")]
    Version(u32),
    #[error("ground-truth trajectory: {0}")]
    Trajectory(#[from] TrajectoryError),
}

/// Path stem of the depth files of `frame`, relative to the sequence directory.
pub fn depth_stem(frame: usize) -> String {
    format!("depth/{frame:06}")
}

pub fn intensity_path(dir: &Path, frame: usize) -> PathBuf {
    dir.join(format!("intensity/{frame:06}.pgm"))
}

fn mkdir(path: &Path) -> Result<(), ExportError> {
    std::fs::create_dir_all(path).map_err(|source| ExportError::Io { path: path.to_path_buf(), source })
}

/// Writes the sequence; returns the manifest path.
pub fn export_sequence(
    dir: &Path,
    scene: &Scene,
    k: &CameraIntrinsics,
    spec: &SequenceSpec,
    seq: &SimSequence,
) -> Result<PathBuf, ExportError> {
    mkdir(&dir.join("depth"))?;
    mkdir(&dir.join("intensity"))?;
    for (i, (_, pose)) in seq.ground_truth.entries().iter().enumerate() {
        let r = render(scene, pose, k);
        io::write_depth(&dir.join(depth_stem(i)), &r.depth)?;
        io::write_intensity_pgm(&intensity_path(dir, i), &r.intensity)?;
    }
    let tum = seq.ground_truth.to_tum_string();
    let gt_path = dir.join(GROUND_TRUTH_FILE);
    std::fs::write(&gt_path, &tum).map_err(|source| ExportError::Io { path: gt_path, source })?;
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        intrinsics: *k,
        scene: scene.clone(),
        sequence: spec.clone(),
        trajectory_tum: tum,
        frames: seq.frames.clone(),
        landmarks: seq.landmarks.clone(),
        corruption: seq.corruption.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|source| ExportError::Json { path: path.clone(), source })?;
    std::fs::write(&path, text + "\n").map_err(|source| ExportError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// A sequence directory opened for reading.
pub struct SequenceDir {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub ground_truth: Trajectory,
}

impl SequenceDir {
    pub fn open(dir: &Path) -> Result<Self, ExportError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| ExportError::Io { path: path.clone(), source })?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|source| ExportError::Json { path, source })?;
        if manifest.version != MANIFEST_VERSION {
            return Err(ExportError::Version(manifest.version));
        }
        let ground_truth = Trajectory::parse_tum(&manifest.trajectory_tum)?;
        Ok(SequenceDir { dir: dir.to_path_buf(), manifest, ground_truth })
    }

    pub fn ground_truth_depth(&self) -> DirectoryGroundTruth {
        DirectoryGroundTruth::new(&self.dir, depth_stem)
    }

    pub fn intensity(&self, frame: usize) -> Result<GrayImage, FormatError> {
        io::read_intensity_pgm(&intensity_path(&self.dir, frame))
    }
}
