//! Two-mode depth prediction contract.
//!
//! Mode 1 maps an image to relative (affine-invariant) depth. Mode 2 additionally
//! takes sparse depth and returns depth on the scale of that sparse input. The
//! oracle implementation distorts ground truth in a controlled, seeded way; the
//! file implementation serves precomputed network outputs from disk.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fast::fast_corners;
use crate::image::{DepthMap, GrayImage, SparseDepthMap, SparseSample};
use crate::io::{self, FormatError};
use crate::seed;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("no ground-truth depth for frame {0}")]
    MissingGroundTruth(usize),
    #[error("missing depth file {0}")]
    MissingFile(PathBuf),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("sparse depth set is empty")]
    EmptySparseSet,
    #[error("non-positive sparse depth")]
    NonPositiveDepth,
    #[error("no sparse sample falls on a valid predicted pixel")]
    NoSparseOverlap,
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
}

/// Depth prediction for frames addressed by index.
pub trait DepthProvider: Sync {
    /// Relative depth; carries no metric scale.
    fn predict_mode1(&self, frame: usize) -> Result<DepthMap, ProviderError>;

    /// Depth anchored to the scale of `sparse`.
    fn predict_mode2(&self, frame: usize, sparse: &SparseDepthMap) -> Result<DepthMap, ProviderError>;

    /// Mode-1 map that agrees with [`DepthProvider::predict_mode1`] on `pixels`; other
    /// pixels may be invalid. Lets callers that sample a few locations skip full maps.
    fn predict_mode1_subset(&self, frame: usize, pixels: &[(usize, usize)]) -> Result<DepthMap, ProviderError> {
        let _ = pixels;
        self.predict_mode1(frame)
    }
}

/// Source of ground-truth depth for the oracle.
pub trait GroundTruthDepth: Sync {
    fn ground_truth(&self, frame: usize) -> Result<DepthMap, ProviderError>;

    /// Map that agrees with [`GroundTruthDepth::ground_truth`] on `pixels`; other pixels may be invalid.
    fn ground_truth_subset(&self, frame: usize, pixels: &[(usize, usize)]) -> Result<DepthMap, ProviderError> {
        let _ = pixels;
        self.ground_truth(frame)
    }
}

impl GroundTruthDepth for Vec<DepthMap> {
    fn ground_truth(&self, frame: usize) -> Result<DepthMap, ProviderError> {
        self.get(frame).cloned().ok_or(ProviderError::MissingGroundTruth(frame))
    }
}

/// Ground truth stored as `<dir>/<stem>` depth files, one per frame.
pub struct DirectoryGroundTruth {
    dir: PathBuf,
    stem: fn(usize) -> String,
}

impl DirectoryGroundTruth {
    pub fn new(dir: impl Into<PathBuf>, stem: fn(usize) -> String) -> Self {
        Self { dir: dir.into(), stem }
    }
}

impl GroundTruthDepth for DirectoryGroundTruth {
    fn ground_truth(&self, frame: usize) -> Result<DepthMap, ProviderError> {
        let stem = self.dir.join((self.stem)(frame));
        io::read_depth(&stem).map_err(|e| {
            if e.is_not_found() {
                ProviderError::MissingGroundTruth(frame)
            } else {
                e.into()
            }
        })
    }
}

fn default_factor_range() -> (f64, f64) {
    (1.5, 3.0)
}

/// Distortion applied by the oracle to ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Mode-1 affine scale `a > 0`.
    pub affine_scale: f64,
    /// Mode-1 affine shift `b`.
    pub affine_shift: f64,
    /// Log-normal multiplicative noise sigma.
    pub noise_sigma: f64,
    /// Fraction of valid pixels multiplied by an outlier factor (mode 1).
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default = "default_factor_range")]
    pub outlier_factor_range: (f64, f64),
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            affine_scale: 1.0,
            affine_shift: 0.0,
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            outlier_factor_range: default_factor_range(),
            seed: 0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::InvalidConfig(m.to_string()));
        if !(self.affine_scale > 0.0 && self.affine_scale.is_finite()) {
            return bad("affine_scale must be positive");
        }
        if !self.affine_shift.is_finite() {
            return bad("affine_shift must be finite");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must be in [0, 1)");
        }
        let (lo, hi) = self.outlier_factor_range;
        if !(lo > 1.0 && hi >= lo && hi.is_finite()) {
            return bad("outlier_factor_range must satisfy 1 < low <= high");
        }
        Ok(())
    }
}

/// Mode-1 output together with the pixels the oracle corrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPrediction {
    pub depth: DepthMap,
    pub corrupted: Vec<bool>,
}

/// Simulator-backed provider; stands in for a trained network.
pub struct OracleDepthProvider<G> {
    truth: G,
    config: OracleConfig,
}

const STREAM_MODE1: u64 = 1;
const STREAM_MODE2: u64 = 2;

impl<G: GroundTruthDepth> OracleDepthProvider<G> {
    pub fn new(truth: G, config: OracleConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        Ok(Self { truth, config })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn truth(&self) -> &G {
        &self.truth
    }

    /// Distorted value of ground-truth depth `z` at raster index `idx`, and whether it is an outlier.
    fn distort_mode1(&self, frame: usize, idx: usize, z: f64) -> (f64, bool) {
        let cfg = &self.config;
        let key = seed::derive(cfg.seed, &[STREAM_MODE1, frame as u64, idx as u64]);
        let eps = seed::normal(key, 0);
        let mut d = (cfg.affine_scale * z + cfg.affine_shift) * (cfg.noise_sigma * eps).exp();
        let outlier = seed::uniform(key, 2) < cfg.outlier_fraction;
        if outlier {
            let (lo, hi) = cfg.outlier_factor_range;
            d *= lo + (hi - lo) * seed::uniform(key, 3);
        }
        (d, outlier)
    }

    /// Mode-1 prediction plus per-pixel outlier labels.
    pub fn predict_mode1_labeled(&self, frame: usize) -> Result<LabeledPrediction, ProviderError> {
        let gt = self.truth.ground_truth(frame)?;
        let (w, h) = (gt.width(), gt.height());
        let mut values = vec![0.0; w * h];
        let mut corrupted = vec![false; w * h];
        values.par_chunks_mut(w).zip(corrupted.par_chunks_mut(w)).enumerate().for_each(|(y, (row, bad))| {
            for x in 0..w {
                if let Some(z) = gt.get(x, y) {
                    (row[x], bad[x]) = self.distort_mode1(frame, y * w + x, z);
                }
            }
        });
        let depth = DepthMap::from_values_and_mask(w, h, values, gt.mask().to_vec())
            .expect("buffers sized from ground truth");
        Ok(LabeledPrediction { depth, corrupted })
    }
}

/// Rescales `depth` so the median ratio `sparse / depth` over sample pixels is 1.
pub fn anchor_to_sparse(depth: &DepthMap, sparse: &SparseDepthMap) -> Result<DepthMap, ProviderError> {
    if sparse.is_empty() {
        return Err(ProviderError::EmptySparseSet);
    }
    let ratios: Vec<f64> =
        sparse.samples().iter().filter_map(|s| depth.get(s.u as usize, s.v as usize).map(|z| s.z / z)).collect();
    let theta = crate::scale::upper_median(ratios).ok_or(ProviderError::NoSparseOverlap)?;
    Ok(depth.scaled(theta))
}

impl<G: GroundTruthDepth> DepthProvider for OracleDepthProvider<G> {
    fn predict_mode1(&self, frame: usize) -> Result<DepthMap, ProviderError> {
        Ok(self.predict_mode1_labeled(frame)?.depth)
    }

    fn predict_mode1_subset(&self, frame: usize, pixels: &[(usize, usize)]) -> Result<DepthMap, ProviderError> {
        let gt = self.truth.ground_truth_subset(frame, pixels)?;
        let w = gt.width();
        let mut out = DepthMap::new_invalid(w, gt.height());
        for &(x, y) in pixels {
            if let Some(z) = gt.get(x, y) {
                out.set(x, y, self.distort_mode1(frame, y * w + x, z).0);
            }
        }
        Ok(out)
    }

    fn predict_mode2(&self, frame: usize, sparse: &SparseDepthMap) -> Result<DepthMap, ProviderError> {
        if sparse.is_empty() {
            return Err(ProviderError::EmptySparseSet);
        }
        let gt = self.truth.ground_truth(frame)?;
        let (w, h) = (gt.width(), gt.height());
        let sigma = self.config.noise_sigma;
        let base = self.config.seed;
        let mut values = vec![0.0; w * h];
        values.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for x in 0..w {
                if let Some(z) = gt.get(x, y) {
                    let key = seed::derive(base, &[STREAM_MODE2, frame as u64, (y * w + x) as u64]);
                    row[x] = z * (sigma * seed::normal(key, 0)).exp();
                }
            }
        });
        let noisy = DepthMap::from_values_and_mask(w, h, values, gt.mask().to_vec()).expect("sized buffers");
        anchor_to_sparse(&noisy, sparse)
    }
}

/// Serves precomputed predictions named `<index:06>.pfm` (optional `_mask.pgm` sidecar).
///
/// Mode 2 reuses the stored map and anchors it to the sparse input by median ratio.
pub struct FileDepthProvider {
    dir: PathBuf,
}

impl FileDepthProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, frame: usize) -> PathBuf {
        self.dir.join(format!("{frame:06}.pfm"))
    }

    fn load(&self, frame: usize) -> Result<DepthMap, ProviderError> {
        let path = self.path_for(frame);
        if !path.exists() {
            return Err(ProviderError::MissingFile(path));
        }
        Ok(io::read_depth(&path.with_extension(""))?)
    }
}

impl DepthProvider for FileDepthProvider {
    fn predict_mode1(&self, frame: usize) -> Result<DepthMap, ProviderError> {
        self.load(frame)
    }

    fn predict_mode2(&self, frame: usize, sparse: &SparseDepthMap) -> Result<DepthMap, ProviderError> {
        if sparse.is_empty() {
            return Err(ProviderError::EmptySparseSet);
        }
        anchor_to_sparse(&self.load(frame)?, sparse)
    }
}

/// Divides every depth by the largest one.
pub fn normalize_depths(depths: &[f64]) -> Result<Vec<f64>, ProviderError> {
    if depths.is_empty() {
        return Err(ProviderError::EmptySparseSet);
    }
    if depths.iter().any(|z| !(*z > 0.0) || !z.is_finite()) {
        return Err(ProviderError::NonPositiveDepth);
    }
    let max = depths.iter().copied().fold(f64::MIN, f64::max);
    Ok(depths.iter().map(|z| z / max).collect())
}

/// Max-normalizes a sparse depth map; the largest output depth is exactly 1.
pub fn normalize_sparse(sparse: &SparseDepthMap) -> Result<SparseDepthMap, ProviderError> {
    let depths: Vec<f64> = sparse.samples().iter().map(|s| s.z).collect();
    let normalized = normalize_depths(&depths)?;
    let samples = sparse.samples().iter().zip(normalized).map(|(s, z)| SparseSample { z, ..*s }).collect();
    Ok(sparse.with_samples(samples))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSampling {
    pub sparse: SparseDepthMap,
    /// True when FAST produced fewer than the requested count and grid points were added.
    pub grid_fallback: bool,
    pub corners_used: usize,
}

/// Picks up to `target_count` pixels with valid ground truth: strongest FAST corners
/// first, topped up from a uniform grid when corners run short.
pub fn sample_sparse_depth(
    image: &GrayImage,
    gt_depth: &DepthMap,
    target_count: usize,
    contrast_threshold: f64,
) -> SparseSampling {
    let (w, h) = (gt_depth.width(), gt_depth.height());
    let mut corners = if image.width() == w && image.height() == h { fast_corners(image, contrast_threshold) } else { Vec::new() };
    // Stable sort keeps raster order among equal scores.
    corners.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut taken = vec![false; w * h];
    let mut samples = Vec::new();
    for c in &corners {
        if samples.len() >= target_count {
            break;
        }
        if let Some(z) = gt_depth.get(c.u, c.v) {
            taken[c.v * w + c.u] = true;
            samples.push(SparseSample { u: c.u as u32, v: c.v as u32, z });
        }
    }
    let corners_used = samples.len();
    let grid_fallback = samples.len() < target_count;
    if grid_fallback {
        let needed = target_count - samples.len();
        let available = gt_depth.iter_valid().filter(|(x, y, _)| !taken[y * w + x]).count();
        let mut stride = ((w * h) as f64 / needed.max(1) as f64).sqrt().floor().max(1.0) as usize;
        loop {
            let count = grid_points(w, h, stride).filter(|&(x, y)| gt_depth.get(x, y).is_some() && !taken[y * w + x]).count();
            if count >= needed.min(available) || stride == 1 {
                break;
            }
            stride -= 1;
        }
        for (x, y) in grid_points(w, h, stride) {
            if samples.len() >= target_count {
                break;
            }
            if taken[y * w + x] {
                continue;
            }
            if let Some(z) = gt_depth.get(x, y) {
                taken[y * w + x] = true;
                samples.push(SparseSample { u: x as u32, v: y as u32, z });
            }
        }
    }
    let sparse = SparseDepthMap::new(w, h, samples).expect("samples are unique, in bounds and positive");
    SparseSampling { sparse, grid_fallback, corners_used }
}

fn grid_points(w: usize, h: usize, stride: usize) -> impl Iterator<Item = (usize, usize)> {
    let off = stride / 2;
    (off..h).step_by(stride).flat_map(move |y| (off..w).step_by(stride).map(move |x| (x, y)))
}

/// Convenience used by the CLI: a directory-backed oracle.
pub fn directory_oracle(dir: &Path, stem: fn(usize) -> String, config: OracleConfig) -> Result<OracleDepthProvider<DirectoryGroundTruth>, ProviderError> {
    OracleDepthProvider::new(DirectoryGroundTruth::new(dir, stem), config)
}
