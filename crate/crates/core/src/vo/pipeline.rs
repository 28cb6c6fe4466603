//! Tracking loop: bootstrap, per-frame pose, near-far filtering, keyframes with
//! triangulation and scale-recovered depth.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::init::{relative_pose, InitError};
use super::pose::{estimate_pose, Correspondence, PoseConfig};
use super::triangulate::{bearing, parallax_deg, triangulate};
use crate::frame::{Frame, Observation};
use crate::geometry::{project, CameraIntrinsics, PoseSE3, Vec3};
use crate::image::{DepthMap, GrayImage, SparseDepthMap};
use crate::map::{LocalMap, MapPoint, MapPointId, TrackId};
use crate::mapping::{MappingError, MappingFrame};
use crate::nearfar::{
    apply_filter, evaluate, log_rows, project_local_map, sample_prediction, FilterLogRow, SigmaPolicy, MIN_FILTER_POINTS,
};
use crate::provider::{normalize_sparse, DepthProvider, ProviderError};
use crate::scale::{recover_scale, rescale_depth, upper_median, ScaleEstimate};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub enabled: bool,
    pub sigma: SigmaPolicy,
    /// The filter is skipped for smaller sets.
    pub min_points: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { enabled: true, sigma: SigmaPolicy::Adaptive, min_points: MIN_FILTER_POINTS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeyframePolicy {
    /// New keyframe once the camera moved this fraction of the last keyframe's median depth.
    pub translation_fraction: f64,
    /// New keyframe when more than this many frames passed.
    pub max_gap: usize,
}

impl Default for KeyframePolicy {
    fn default() -> Self {
        KeyframePolicy { translation_fraction: 0.2, max_gap: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    /// Median pixel displacement that makes a frame usable as the second bootstrap view.
    pub min_flow_px: f64,
    /// Frames searched for the second bootstrap view.
    pub max_frames: usize,
    pub min_correspondences: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig { min_flow_px: 20.0, max_frames: 30, min_correspondences: 30 }
    }
}

/// How keyframe depth maps are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KeyframeDepth {
    Off,
    /// Relative prediction rescaled by the median ratio to VO depth.
    Relative,
    /// Prediction guided by normalized sparse VO depth, then rescaled.
    #[default]
    SparseGuided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoConfig {
    pub filter: FilterConfig,
    pub keyframe: KeyframePolicy,
    pub init: InitConfig,
    pub pose: PoseConfig,
    pub min_parallax_deg: f64,
    /// Triangulations reprojecting worse than this (pixels) in either view are dropped.
    pub max_reprojection_px: f64,
    /// Number of previous keyframes searched for a triangulation partner.
    pub triangulation_window: usize,
    pub keyframe_depth: KeyframeDepth,
}

impl Default for VoConfig {
    fn default() -> Self {
        VoConfig {
            filter: FilterConfig::default(),
            keyframe: KeyframePolicy::default(),
            init: InitConfig::default(),
            pose: PoseConfig::default(),
            min_parallax_deg: 1.0,
            max_reprojection_px: 3.0,
            triangulation_window: 5,
            keyframe_depth: KeyframeDepth::SparseGuided,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub index: usize,
    pub frame_id: usize,
    pub timestamp: f64,
    pub pose: PoseSE3,
    pub observations: Vec<Observation>,
    /// Median camera depth of the map points this keyframe observes.
    pub median_depth: f64,
    pub sparse_depth: Option<SparseDepthMap>,
    pub depth: Option<DepthMap>,
    pub scale: Option<ScaleEstimate>,
}

impl Keyframe {
    pub fn mapping_frame<'a>(&'a self, image: &'a GrayImage) -> Result<MappingFrame<'a>, MappingError> {
        let depth = self.depth.as_ref().ok_or(MappingError::MissingDepth(self.index))?;
        Ok(MappingFrame { pose: &self.pose, depth, image })
    }
}

/// Per-frame removal sets, keyed by frame id.
pub type RemovalSchedule = BTreeMap<usize, BTreeSet<MapPointId>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    TrackingLost { frame: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoRun {
    pub trajectory: Trajectory,
    pub map: LocalMap,
    pub keyframes: Vec<Keyframe>,
    pub filter_log: Vec<FilterLogRow>,
    pub removals: RemovalSchedule,
    pub status: RunStatus,
    /// Every map point ever created.
    pub created: BTreeSet<MapPointId>,
    /// Created map points whose depth was corrupted at creation.
    pub corrupted: BTreeSet<MapPointId>,
    pub init_frame: usize,
}

impl VoRun {
    pub fn removed(&self) -> BTreeSet<MapPointId> {
        self.removals.values().flatten().copied().collect()
    }
}

#[derive(Debug, Error)]
pub enum VoError {
    #[error("sequence needs at least 2 frames")]
    TooFewFrames,
    #[error("initialization failed: {0}")]
    Initialization(String),
    #[error("depth provider: {0}")]
    Provider(#[from] ProviderError),
}

impl From<InitError> for VoError {
    fn from(e: InitError) -> Self {
        VoError::Initialization(e.to_string())
    }
}

/// Frames plus the per-track depth multipliers applied when a track is first triangulated.
#[derive(Debug, Clone, Copy)]
pub struct SequenceInput<'a> {
    pub frames: &'a [Frame],
    pub intrinsics: CameraIntrinsics,
    pub corruption: &'a BTreeMap<TrackId, f64>,
}

/// Whether the frame starts a new keyframe. Inclusive translation threshold.
pub fn keyframe_decision(frame_id: usize, pose: &PoseSE3, last_kf: Option<&Keyframe>, policy: &KeyframePolicy) -> bool {
    let Some(kf) = last_kf else { return true };
    let moved = (pose.center() - kf.pose.center()).norm();
    moved >= policy.translation_fraction * kf.median_depth || frame_id - kf.frame_id > policy.max_gap
}

enum RemovalSource<'a> {
    Filter,
    Replay(&'a RemovalSchedule),
    Disabled,
}

pub fn track_sequence(input: &SequenceInput<'_>, provider: &dyn DepthProvider, config: &VoConfig) -> Result<VoRun, VoError> {
    let source = if config.filter.enabled { RemovalSource::Filter } else { RemovalSource::Disabled };
    Tracker::new(input, provider, config, source).run()
}

/// Runs with the filter replaced by a fixed removal schedule.
pub fn replay_removals(
    input: &SequenceInput<'_>,
    provider: &dyn DepthProvider,
    config: &VoConfig,
    schedule: &RemovalSchedule,
) -> Result<VoRun, VoError> {
    Tracker::new(input, provider, config, RemovalSource::Replay(schedule)).run()
}

fn common_tracks<'f>(a: &'f Frame, b: &'f Frame) -> Vec<(&'f Observation, &'f Observation)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.observations.len() && j < b.observations.len() {
        let (oa, ob) = (&a.observations[i], &b.observations[j]);
        match oa.track.cmp(&ob.track) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((oa, ob));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Pixels read by bilinear sampling with nearest-valid fallback around `(u, v)`.
fn support_pixels(u: f64, v: f64, w: usize, h: usize, out: &mut Vec<(usize, usize)>) {
    let (x0, y0) = (u.floor() as i64, v.floor() as i64);
    for y in (y0 - 1)..=(y0 + 2) {
        for x in (x0 - 1)..=(x0 + 2) {
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                out.push((x as usize, y as usize));
            }
        }
    }
}

struct Tracker<'a> {
    frames: &'a [Frame],
    k: CameraIntrinsics,
    corruption: &'a BTreeMap<TrackId, f64>,
    provider: &'a dyn DepthProvider,
    cfg: &'a VoConfig,
    source: RemovalSource<'a>,
    map: LocalMap,
    keyframes: Vec<Keyframe>,
    poses: BTreeMap<usize, PoseSE3>,
    filter_log: Vec<FilterLogRow>,
    removals: RemovalSchedule,
    created: BTreeSet<MapPointId>,
    corrupted: BTreeSet<MapPointId>,
}

impl<'a> Tracker<'a> {
    fn new(
        input: &SequenceInput<'a>,
        provider: &'a dyn DepthProvider,
        cfg: &'a VoConfig,
        source: RemovalSource<'a>,
    ) -> Self {
        Tracker {
            frames: input.frames,
            k: input.intrinsics,
            corruption: input.corruption,
            provider,
            cfg,
            source,
            map: LocalMap::new(),
            keyframes: Vec::new(),
            poses: BTreeMap::new(),
            filter_log: Vec::new(),
            removals: BTreeMap::new(),
            created: BTreeSet::new(),
            corrupted: BTreeSet::new(),
        }
    }

    fn run(mut self) -> Result<VoRun, VoError> {
        if self.frames.len() < 2 {
            return Err(VoError::TooFewFrames);
        }
        let m = self.bootstrap()?;
        let mut status = RunStatus::Complete;
        let mut prev: Vec<usize> = vec![0];
        for idx in 1..self.frames.len() {
            let pose = if idx == m {
                self.poses[&m]
            } else {
                match self.track_frame(idx, &prev) {
                    Ok(p) => p,
                    Err(reason) => {
                        status = RunStatus::TrackingLost { frame: self.frames[idx].id, reason };
                        break;
                    }
                }
            };
            self.poses.insert(idx, pose);
            self.filter_frame(idx, &pose)?;
            let frame_id = self.frames[idx].id;
            if idx > m && keyframe_decision(frame_id, &pose, self.keyframes.last(), &self.cfg.keyframe) {
                self.add_keyframe(idx, pose)?;
            } else if idx == m {
                self.finish_keyframe(1)?;
            }
            let observed = self.observed_points(idx);
            self.map.record_observations(frame_id, &observed);
            prev.push(idx);
        }
        let entries = self.poses.iter().map(|(&i, p)| (self.frames[i].timestamp, *p)).collect();
        let trajectory = Trajectory::from_entries(entries).map_err(|e| VoError::Initialization(e.to_string()))?;
        Ok(VoRun {
            trajectory,
            map: self.map,
            keyframes: self.keyframes,
            filter_log: self.filter_log,
            removals: self.removals,
            status,
            created: self.created,
            corrupted: self.corrupted,
            init_frame: m,
        })
    }

    /// Picks the second view, estimates its pose and triangulates the first map points.
    fn bootstrap(&mut self) -> Result<usize, VoError> {
        let icfg = &self.cfg.init;
        let f0 = &self.frames[0];
        let last = self.frames.len().min(icfg.max_frames + 1);
        let mut chosen = None;
        let mut best_flow: Option<(usize, f64)> = None;
        for j in 1..last {
            let common = common_tracks(f0, &self.frames[j]);
            if common.len() < icfg.min_correspondences.max(8) {
                continue;
            }
            let flows: Vec<f64> = common.iter().map(|(a, b)| ((a.u - b.u).powi(2) + (a.v - b.v).powi(2)).sqrt()).collect();
            let flow = upper_median(flows).unwrap_or(0.0);
            if flow >= icfg.min_flow_px {
                chosen = Some(j);
                break;
            }
            if best_flow.is_none_or(|(_, f)| flow > f) {
                best_flow = Some((j, flow));
            }
        }
        let m = chosen.or(best_flow.map(|(j, _)| j)).ok_or_else(|| {
            VoError::Initialization(format!("no frame among the first {last} shares enough tracks with frame 0"))
        })?;
        let common = common_tracks(f0, &self.frames[m]);
        let o1: Vec<(f64, f64)> = common.iter().map(|(a, _)| (a.u, a.v)).collect();
        let o2: Vec<(f64, f64)> = common.iter().map(|(_, b)| (b.u, b.v)).collect();
        let (pose_m, _) = relative_pose(&o1, &o2, &self.k)?;
        self.poses.insert(0, PoseSE3::identity());
        self.poses.insert(m, pose_m);
        self.push_keyframe(0, PoseSE3::identity());
        self.push_keyframe(m, pose_m);
        for (a, b) in common {
            let Ok(p) = triangulate((a.u, a.v), (b.u, b.v), &PoseSE3::identity(), &pose_m, &self.k, self.cfg.min_parallax_deg)
            else {
                continue;
            };
            if self.reprojects(&p, &PoseSE3::identity(), a) && self.reprojects(&p, &pose_m, b) {
                self.insert_point(a.track, p, 1);
            }
        }
        if self.map.len() < 3 {
            return Err(VoError::Initialization(format!("only {} points triangulated", self.map.len())));
        }
        let observed = self.observed_points(0);
        self.map.record_observations(self.frames[0].id, &observed);
        self.finish_keyframe(0)?;
        Ok(m)
    }

    fn reprojects(&self, p: &Vec3, pose: &PoseSE3, o: &Observation) -> bool {
        project(&self.k, pose, p)
            .is_ok_and(|px| ((px.u - o.u).powi(2) + (px.v - o.v).powi(2)).sqrt() <= self.cfg.max_reprojection_px)
    }

    /// Inserts a fresh map point, applying any corruption along the reference keyframe's ray.
    fn insert_point(&mut self, track: TrackId, p: Vec3, kf_index: usize) {
        let id = MapPointId::from(track);
        let position = match self.corruption.get(&track) {
            Some(&factor) => {
                let c = self.keyframes[kf_index].pose.center();
                self.corrupted.insert(id);
                c + (p - c) * factor
            }
            None => p,
        };
        let point = MapPoint { id, position, reference_keyframe: kf_index, observation_count: 0 };
        if self.map.insert(point).is_ok() {
            self.created.insert(id);
        }
    }

    fn push_keyframe(&mut self, idx: usize, pose: PoseSE3) {
        let f = &self.frames[idx];
        self.keyframes.push(Keyframe {
            index: self.keyframes.len(),
            frame_id: f.id,
            timestamp: f.timestamp,
            pose,
            observations: f.observations.clone(),
            median_depth: 0.0,
            sparse_depth: None,
            depth: None,
            scale: None,
        });
    }

    fn observed_points(&self, idx: usize) -> Vec<MapPointId> {
        self.frames[idx]
            .observations
            .iter()
            .map(|o| MapPointId::from(o.track))
            .filter(|id| self.map.contains(*id))
            .collect()
    }

    fn correspondences(&self, idx: usize) -> Vec<Correspondence> {
        self.frames[idx]
            .observations
            .iter()
            .filter_map(|o| {
                let mp = self.map.get(MapPointId::from(o.track))?;
                Some(Correspondence { point: mp.position, u: o.u, v: o.v })
            })
            .collect()
    }

    fn track_frame(&self, idx: usize, prev: &[usize]) -> Result<PoseSE3, String> {
        let obs = self.correspondences(idx);
        let init = match prev {
            [.., a, b] => {
                let (pa, pb) = (self.poses[a], self.poses[b]);
                let velocity = pb.compose(&pa.inverse());
                velocity.compose(&pb)
            }
            [.., b] => self.poses[b],
            [] => PoseSE3::identity(),
        };
        match estimate_pose(&obs, &self.k, &init, &self.cfg.pose) {
            Ok(est) => Ok(est.pose),
            Err(first) => {
                let kf_pose = self.keyframes.last().map(|kf| kf.pose).unwrap_or_else(PoseSE3::identity);
                estimate_pose(&obs, &self.k, &kf_pose, &self.cfg.pose)
                    .map(|est| est.pose)
                    .map_err(|second| format!("{first}; retry from keyframe pose: {second}"))
            }
        }
    }

    fn filter_frame(&mut self, idx: usize, pose: &PoseSE3) -> Result<(), VoError> {
        let frame_id = self.frames[idx].id;
        let outliers = match self.source {
            RemovalSource::Disabled => return Ok(()),
            RemovalSource::Replay(schedule) => match schedule.get(&frame_id) {
                Some(ids) => ids.iter().copied().filter(|id| self.map.contains(*id)).collect(),
                None => return Ok(()),
            },
            RemovalSource::Filter => {
                let ids = self.observed_points(idx);
                if ids.len() < self.cfg.filter.min_points.max(2) {
                    return Ok(());
                }
                let pts: Vec<(MapPointId, Vec3)> =
                    ids.iter().map(|id| (*id, self.map.get(*id).expect("observed ids exist").position)).collect();
                let (w, h) = (self.k.width() as usize, self.k.height() as usize);
                let mut pixels = Vec::with_capacity(pts.len() * 16);
                for (_, p) in &pts {
                    if let Ok(px) = project(&self.k, pose, p) {
                        if self.k.contains(px.u, px.v) {
                            support_pixels(px.u, px.v, w, h, &mut pixels);
                        }
                    }
                }
                pixels.sort_unstable();
                pixels.dedup();
                let pred = self.provider.predict_mode1_subset(frame_id, &pixels)?;
                let projected = project_local_map(pts, pose, &self.k, &pred);
                if projected.len() < self.cfg.filter.min_points.max(2) {
                    return Ok(());
                }
                let report = evaluate(&projected, self.cfg.filter.sigma).expect("at least two points");
                self.filter_log.extend(log_rows(frame_id, &projected, &report));
                report.outlier_ids
            }
        };
        if outliers.is_empty() {
            return Ok(());
        }
        apply_filter(&mut self.map, &outliers).expect("outliers are current map points");
        self.removals.insert(frame_id, outliers);
        Ok(())
    }

    fn add_keyframe(&mut self, idx: usize, pose: PoseSE3) -> Result<(), VoError> {
        self.push_keyframe(idx, pose);
        let kf_index = self.keyframes.len() - 1;
        let window_start = kf_index.saturating_sub(self.cfg.triangulation_window);
        let observations = self.frames[idx].observations.clone();
        for o in &observations {
            let id = MapPointId::from(o.track);
            if self.map.contains(id) || self.map.is_retired(id) {
                continue;
            }
            let d_new = bearing(&pose, &self.k, o.u, o.v);
            let mut best: Option<(f64, usize, Observation)> = None;
            for (j, kf) in self.keyframes[window_start..kf_index].iter().enumerate() {
                let Ok(pos) = kf.observations.binary_search_by_key(&o.track, |x| x.track) else { continue };
                let ob = kf.observations[pos];
                let angle = parallax_deg(&bearing(&kf.pose, &self.k, ob.u, ob.v), &d_new);
                if best.is_none_or(|(a, _, _)| angle > a) {
                    best = Some((angle, window_start + j, ob));
                }
            }
            let Some((_, j, ob)) = best else { continue };
            let other = self.keyframes[j].pose;
            let Ok(p) = triangulate((ob.u, ob.v), (o.u, o.v), &other, &pose, &self.k, self.cfg.min_parallax_deg) else {
                continue;
            };
            if self.reprojects(&p, &other, &ob) && self.reprojects(&p, &pose, o) {
                self.insert_point(o.track, p, kf_index);
            }
        }
        self.finish_keyframe(kf_index)
    }

    /// Median depth, sparse VO depth and, when enabled, the rescaled predicted depth.
    fn finish_keyframe(&mut self, kf_index: usize) -> Result<(), VoError> {
        let kf = &self.keyframes[kf_index];
        let (w, h) = (self.k.width() as usize, self.k.height() as usize);
        let mut samples = Vec::new();
        for o in &kf.observations {
            if let Some(mp) = self.map.get(MapPointId::from(o.track)) {
                if let Ok(px) = project(&self.k, &kf.pose, &mp.position) {
                    if let Some(z) = px.z.filter(|z| *z > 0.0) {
                        samples.push((px.u, px.v, z));
                    }
                }
            }
        }
        let median_depth = upper_median(samples.iter().map(|s| s.2).collect()).unwrap_or(0.0);
        let sparse = SparseDepthMap::from_subpixel(w, h, samples.iter().copied());
        let frame_id = kf.frame_id;
        let mut depth = None;
        let mut scale = None;
        if self.cfg.keyframe_depth != KeyframeDepth::Off && !sparse.is_empty() {
            let pred = match self.cfg.keyframe_depth {
                KeyframeDepth::SparseGuided => self.provider.predict_mode2(frame_id, &normalize_sparse(&sparse)?)?,
                _ => self.provider.predict_mode1(frame_id)?,
            };
            let pairs: Vec<(f64, f64)> =
                samples.iter().filter_map(|&(u, v, z)| sample_prediction(&pred, u, v).map(|zp| (z, zp))).collect();
            if let Ok(est) = recover_scale(&pairs) {
                depth = Some(rescale_depth(&pred, est.theta_s).expect("recovered scale is positive"));
                scale = Some(est);
            }
        }
        let kf = &mut self.keyframes[kf_index];
        kf.median_depth = median_depth;
        kf.sparse_depth = Some(sparse);
        kf.depth = depth;
        kf.scale = scale;
        Ok(())
    }
}
