//! Cross-keyframe consistency check and point-cloud fusion.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{project_transferred, transfer_point, unproject, CameraIntrinsics, PixelPoint, PoseSE3, Vec3};
use crate::image::{DepthMap, GrayImage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("keyframe {0} has no depth map")]
    MissingDepth(usize),
    #[error("keyframe {0} has no image")]
    MissingImage(usize),
    #[error("keyframe {0} has no pose")]
    MissingPose(usize),
    #[error("{what} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch { what: &'static str, got_w: usize, got_h: usize, want_w: usize, want_h: usize },
    #[error("threshold {name} must be non-negative, got {value}")]
    InvalidThreshold { name: &'static str, value: f64 },
}

/// Everything the check needs from one keyframe.
#[derive(Debug, Clone, Copy)]
pub struct MappingFrame<'a> {
    pub pose: &'a PoseSE3,
    pub depth: &'a DepthMap,
    pub image: &'a GrayImage,
}

impl MappingFrame<'_> {
    fn check_dims(&self, k: &CameraIntrinsics) -> Result<(), MappingError> {
        let (w, h) = (k.width() as usize, k.height() as usize);
        for (what, gw, gh) in
            [("depth", self.depth.width(), self.depth.height()), ("image", self.image.width(), self.image.height())]
        {
            if gw != w || gh != h {
                return Err(MappingError::DimensionMismatch { what, got_w: gw, got_h: gh, want_w: w, want_h: h });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassMask {
    width: usize,
    height: usize,
    pass: Vec<bool>,
}

impl PassMask {
    pub fn new(width: usize, height: usize) -> Self {
        PassMask { width, height, pass: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pass[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, pass: bool) {
        self.pass[y * self.width + x] = pass;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.pass
    }

    pub fn count(&self) -> usize {
        self.pass.iter().filter(|p| **p).count()
    }
}

/// Pixel test: transfer `(x, y)` of frame 2 into frame 1 and compare depth and intensity.
fn pixel_passes(
    x: usize,
    y: usize,
    z2: f64,
    kf2: &MappingFrame<'_>,
    kf1: &MappingFrame<'_>,
    k: &CameraIntrinsics,
    delta: f64,
    gamma: f64,
) -> bool {
    let i2 = kf2.image.at(x, y);
    if !kf2.image.is_valid_at(x, y) {
        return false;
    }
    let Ok(p2) = unproject(k, &PixelPoint::with_depth(x as f64, y as f64, z2)) else {
        return false;
    };
    let p12 = transfer_point(kf2.pose, kf1.pose, &p2);
    let Ok((u12, v12)) = project_transferred(&p12, k) else {
        return false;
    };
    if !k.contains(u12, v12) {
        return false;
    }
    let (Some(z1), Some(i1)) = (kf1.depth.bilinear(u12, v12), kf1.image.bilinear(u12, v12)) else {
        return false;
    };
    (z1 - p12.z).abs() < delta && (i1 - i2).abs() < gamma
}

/// Per-pixel pass mask for `kf2` against `kf1`.
pub fn consistency_check(
    kf2: &MappingFrame<'_>,
    kf1: &MappingFrame<'_>,
    k: &CameraIntrinsics,
    delta: f64,
    gamma: f64,
) -> Result<PassMask, MappingError> {
    for (name, value) in [("delta", delta), ("gamma", gamma)] {
        if !(value >= 0.0) {
            return Err(MappingError::InvalidThreshold { name, value });
        }
    }
    kf2.check_dims(k)?;
    kf1.check_dims(k)?;
    let (w, h) = (kf2.depth.width(), kf2.depth.height());
    let rows: Vec<Vec<bool>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| kf2.depth.get(x, y).is_some_and(|z2| pixel_passes(x, y, z2, kf2, kf1, k, delta, gamma)))
                .collect()
        })
        .collect();
    Ok(PassMask { width: w, height: h, pass: rows.concat() })
}

type VoxelKey = [i64; 3];

/// Append-only world point cloud with keep-first voxel downsampling.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    points: Vec<Vec3>,
    intensities: Option<Vec<f64>>,
    voxel: Option<(f64, HashSet<VoxelKey>)>,
}

impl PointCloud {
    pub fn new(with_intensity: bool) -> Self {
        PointCloud { points: Vec::new(), intensities: with_intensity.then(Vec::new), voxel: None }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn intensities(&self) -> Option<&[f64]> {
        self.intensities.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Unconditional append.
    pub fn push(&mut self, p: Vec3, intensity: Option<f64>) {
        if let Some((edge, occupied)) = &mut self.voxel {
            occupied.insert(voxel_key(&p, *edge));
        }
        self.points.push(p);
        if let Some(int) = &mut self.intensities {
            int.push(intensity.unwrap_or(0.0));
        }
    }

    /// Appends unless the voxel of edge `edge` containing `p` is already occupied.
    pub fn push_downsampled(&mut self, p: Vec3, intensity: Option<f64>, edge: f64) -> bool {
        let rebuild = !matches!(&self.voxel, Some((e, _)) if *e == edge);
        if rebuild {
            let occupied = self.points.iter().map(|q| voxel_key(q, edge)).collect();
            self.voxel = Some((edge, occupied));
        }
        let (_, occupied) = self.voxel.as_mut().expect("index built above");
        if !occupied.insert(voxel_key(&p, edge)) {
            return false;
        }
        self.points.push(p);
        if let Some(int) = &mut self.intensities {
            int.push(intensity.unwrap_or(0.0));
        }
        true
    }
}

fn voxel_key(p: &Vec3, edge: f64) -> VoxelKey {
    [(p.x / edge).floor() as i64, (p.y / edge).floor() as i64, (p.z / edge).floor() as i64]
}

/// Unprojects passing pixels into the world and appends them. `voxel <= 0` disables
/// downsampling. Returns the number of points appended.
pub fn fuse_keyframe(
    cloud: &mut PointCloud,
    pose: &PoseSE3,
    depth: &DepthMap,
    pass_mask: &PassMask,
    k: &CameraIntrinsics,
    image: Option<&GrayImage>,
    voxel: f64,
) -> Result<usize, MappingError> {
    if pass_mask.width() != depth.width() || pass_mask.height() != depth.height() {
        return Err(MappingError::DimensionMismatch {
            what: "pass mask",
            got_w: pass_mask.width(),
            got_h: pass_mask.height(),
            want_w: depth.width(),
            want_h: depth.height(),
        });
    }
    let to_world = pose.inverse();
    let mut fused = 0;
    for (x, y, z) in depth.iter_valid() {
        if !pass_mask.get(x, y) {
            continue;
        }
        let Ok(pc) = unproject(k, &PixelPoint::with_depth(x as f64, y as f64, z)) else {
            continue;
        };
        let pw = to_world.transform(&pc);
        let intensity = image.map(|im| im.at(x, y));
        let added = if voxel > 0.0 {
            cloud.push_downsampled(pw, intensity, voxel)
        } else {
            cloud.push(pw, intensity);
            true
        };
        fused += added as usize;
    }
    Ok(fused)
}

/// One row of the per-keyframe mapping summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MappingSummaryRow {
    pub kf_id: usize,
    pub pixels: usize,
    pub passed: usize,
    pub fused: usize,
}

pub fn format_summary(rows: &[MappingSummaryRow]) -> String {
    let mut out = String::from("kf_id,pixels,passed,pass_rate,fused\n");
    for r in rows {
        let rate = if r.pixels == 0 { 0.0 } else { r.passed as f64 / r.pixels as f64 };
        out.push_str(&format!("{},{},{},{:.6},{}\n", r.kf_id, r.pixels, r.passed, rate, r.fused));
    }
    out
}
