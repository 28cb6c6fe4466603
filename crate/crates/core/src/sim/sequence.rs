//! Ground-truth trajectories and labeled feature tracks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::render::{cast_pixel, render};
use super::scene::Scene;
use crate::frame::{Frame, Observation};
use crate::geometry::{project, so3_exp, CameraIntrinsics, Mat3, PoseSE3, Vec3};
use crate::image::DepthMap;
use crate::map::TrackId;
use crate::provider::{GroundTruthDepth, ProviderError};
use crate::seed;
use crate::trajectory::Trajectory;

const STREAM_LANDMARKS: u64 = 10;
const STREAM_NOISE: u64 = 11;
const STREAM_CORRUPTION: u64 = 12;
const STREAM_WALK: u64 = 13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// Constant step, camera looking down +z.
    Straight { start: [f64; 3], step: [f64; 3] },
    /// Horizontal circle around `center` (the scene centroid when absent), always looking at it.
    Orbit {
        radius: f64,
        start_deg: f64,
        arc_deg: f64,
        #[serde(default)]
        center: Option<[f64; 3]>,
    },
    /// Forward motion with seeded heading changes bounded by `max_turn_deg` per frame.
    RandomWalk { start: [f64; 3], speed: f64, max_turn_deg: f64, jitter: f64 },
}

fn default_frame_rate() -> f64 {
    10.0
}

fn default_depth_range() -> [f64; 2] {
    [1.5, 40.0]
}

fn default_factor_range() -> [f64; 2] {
    [1.5, 3.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub trajectory: TrajectorySpec,
    pub n_frames: usize,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    /// Gaussian pixel noise sigma.
    #[serde(default)]
    pub pixel_noise: f64,
    pub landmark_count: usize,
    /// Landmarks are sampled with camera depth inside this range.
    #[serde(default = "default_depth_range")]
    pub landmark_depth_range: [f64; 2],
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default = "default_factor_range")]
    pub outlier_factor_range: [f64; 2],
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid sequence spec: {0}")]
    InvalidSpec(String),
    #[error("no landmark is visible in any frame")]
    NoVisibleLandmarks,
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidSpec(m.to_string()));
        if self.n_frames < 2 {
            return bad("n_frames must be at least 2");
        }
        if !(self.frame_rate > 0.0) {
            return bad("frame_rate must be positive");
        }
        if !(self.pixel_noise >= 0.0) {
            return bad("pixel_noise must be non-negative");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must be in [0, 1)");
        }
        let [lo, hi] = self.outlier_factor_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad("outlier_factor_range must satisfy 0 < low <= high");
        }
        let [dlo, dhi] = self.landmark_depth_range;
        if !(dlo > 0.0 && dhi > dlo) {
            return bad("landmark_depth_range must satisfy 0 < low < high");
        }
        if let TrajectorySpec::Orbit { radius, .. } = self.trajectory {
            if !(radius > 0.0) {
                return bad("orbit radius must be positive");
            }
        }
        Ok(())
    }
}

/// Camera-to-world rotation looking along `forward` with image y pointing towards world +y.
pub fn look_rotation(forward: &Vec3) -> Mat3 {
    let z = forward.normalize();
    let down = Vec3::y();
    let x = down.cross(&z).normalize();
    let y = z.cross(&x);
    Mat3::from_columns(&[x, y, z])
}

pub fn generate_trajectory(spec: &SequenceSpec, scene: &Scene) -> Result<Trajectory, SimError> {
    spec.validate()?;
    let n = spec.n_frames;
    let ts = |i: usize| i as f64 / spec.frame_rate;
    let entries: Vec<(f64, PoseSE3)> = match &spec.trajectory {
        TrajectorySpec::Straight { start, step } => (0..n)
            .map(|i| {
                let c = Vec3::from(*start) + Vec3::from(*step) * i as f64;
                (ts(i), PoseSE3::from_center(Mat3::identity(), c).expect("identity rotation"))
            })
            .collect(),
        TrajectorySpec::Orbit { radius, start_deg, arc_deg, center } => {
            let centroid = center.map(Vec3::from).unwrap_or_else(|| scene.centroid());
            (0..n)
                .map(|i| {
                    let th = (start_deg + arc_deg * i as f64 / (n - 1) as f64).to_radians();
                    let c = centroid + Vec3::new(th.sin(), 0.0, -th.cos()) * *radius;
                    (ts(i), PoseSE3::from_center(look_rotation(&(centroid - c)), c).expect("orthonormal basis"))
                })
                .collect()
        }
        TrajectorySpec::RandomWalk { start, speed, max_turn_deg, jitter } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(spec.seed, &[STREAM_WALK]));
            let max = max_turn_deg.to_radians();
            let mut c = Vec3::from(*start);
            let (mut yaw, mut pitch) = (0.0f64, 0.0f64);
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let r = so3_exp(&Vec3::new(0.0, yaw, 0.0)) * so3_exp(&Vec3::new(pitch, 0.0, 0.0));
                out.push((ts(i), PoseSE3::from_center(r, c).expect("rotation from exp map")));
                yaw += rng.random_range(-max..=max);
                pitch = (pitch + rng.random_range(-max..=max) * 0.5).clamp(-0.15, 0.15);
                let j = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                c += r * Vec3::z() * *speed + j * *jitter;
            }
            out
        }
    };
    Ok(Trajectory::from_entries(entries).expect("timestamps increase with the frame index"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: TrackId,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionLabel {
    pub landmark_id: TrackId,
    /// Depth multiplier applied when the landmark is first triangulated.
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSequence {
    pub ground_truth: Trajectory,
    pub frames: Vec<Frame>,
    pub landmarks: Vec<Landmark>,
    pub corruption: Vec<CorruptionLabel>,
}

/// Occlusion tolerance for landmark visibility at camera depth `z`.
pub fn visibility_tolerance(z: f64) -> f64 {
    1e-6 + 1e-4 * z
}

/// Exact projection of `p` when it is in view and not occluded.
pub fn visible_projection(scene: &Scene, pose: &PoseSE3, k: &CameraIntrinsics, p: &Vec3) -> Option<(f64, f64, f64)> {
    let px = project(k, pose, p).ok()?;
    let z = px.z?;
    if !k.contains(px.u, px.v) {
        return None;
    }
    let hit = cast_pixel(scene, pose, k, px.u, px.v)?;
    ((hit.t - z).abs() <= visibility_tolerance(z)).then_some((px.u, px.v, z))
}

/// True when the pixel at (u, v) and its four bilinear support pixels all see the same primitive.
pub fn on_single_surface(scene: &Scene, pose: &PoseSE3, k: &CameraIntrinsics, u: f64, v: f64) -> bool {
    let Some(centre) = cast_pixel(scene, pose, k, u, v) else { return false };
    let (xmax, ymax) = (k.width() as f64 - 1.0, k.height() as f64 - 1.0);
    let (x0, y0) = (u.floor().min(xmax), v.floor().min(ymax));
    let (x1, y1) = ((x0 + 1.0).min(xmax), (y0 + 1.0).min(ymax));
    [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
        .iter()
        .all(|&(x, y)| cast_pixel(scene, pose, k, x, y).is_some_and(|h| h.primitive == centre.primitive))
}

const LANDMARK_TRIES_PER_DEPTH: usize = 100;

/// Landmarks whose depth in the sampling frame is roughly uniform in inverse depth over
/// `landmark_depth_range`: a target depth is drawn first, then pixels are tried until
/// one hits a surface within 5% of it. Far points stay in view longer, so the depths
/// seen by any one frame come out close to log-uniform.
fn sample_landmarks(scene: &Scene, traj: &Trajectory, k: &CameraIntrinsics, spec: &SequenceSpec) -> Vec<Landmark> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(spec.seed, &[STREAM_LANDMARKS]));
    let [dlo, dhi] = spec.landmark_depth_range;
    let (w, h) = (k.width() as f64, k.height() as f64);
    let mut out = Vec::with_capacity(spec.landmark_count);
    let mut targets = 0;
    while out.len() < spec.landmark_count && targets < 20 * spec.landmark_count.max(1) {
        targets += 1;
        let target = 1.0 / rng.random_range(1.0 / dhi..=1.0 / dlo);
        let pose = traj.pose(rng.random_range(0..traj.len()));
        for _ in 0..LANDMARK_TRIES_PER_DEPTH {
            let u = rng.random_range(-0.5..w - 0.5);
            let v = rng.random_range(-0.5..h - 0.5);
            let Some(hit) = cast_pixel(scene, pose, k, u, v) else { continue };
            if (hit.t / target).ln().abs() <= 0.05 && hit.t >= dlo && hit.t <= dhi {
                out.push(Landmark { id: TrackId(out.len() as u64), position: hit.point.into() });
                break;
            }
        }
    }
    out
}

/// Samples landmarks on the surfaces, observes them in every frame where they are
/// visible and labels a fraction of them for depth corruption.
pub fn generate_observations(
    scene: &Scene,
    traj: &Trajectory,
    k: &CameraIntrinsics,
    spec: &SequenceSpec,
) -> Result<SimSequence, SimError> {
    spec.validate()?;
    let landmarks = sample_landmarks(scene, traj, k, spec);
    let noise = Normal::new(0.0, spec.pixel_noise).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
    let frames: Vec<Frame> = traj
        .entries()
        .iter()
        .enumerate()
        .map(|(i, (ts, pose))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(spec.seed, &[STREAM_NOISE, i as u64]));
            let mut observations = Vec::new();
            for lm in &landmarks {
                // Draw for every landmark so noise does not depend on visibility.
                let (du, dv) = (noise.sample(&mut rng), noise.sample(&mut rng));
                if let Some((u, v, _)) = visible_projection(scene, pose, k, &Vec3::from(lm.position)) {
                    // Points on a silhouette are dropped: any dense depth sampled there mixes two surfaces.
                    if !on_single_surface(scene, pose, k, u, v) {
                        continue;
                    }
                    let (u, v) = (u + du, v + dv);
                    if k.contains(u, v) {
                        observations.push(Observation { track: lm.id, u, v });
                    }
                }
            }
            Frame { id: i, timestamp: *ts, observations }
        })
        .collect();
    if frames.iter().all(|f| f.observations.is_empty()) {
        return Err(SimError::NoVisibleLandmarks);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(spec.seed, &[STREAM_CORRUPTION]));
    let n_bad = (spec.outlier_fraction * landmarks.len() as f64).round() as usize;
    let mut ids: Vec<TrackId> = landmarks.iter().map(|l| l.id).collect();
    ids.shuffle(&mut rng);
    let [lo, hi] = spec.outlier_factor_range;
    let mut corruption: Vec<CorruptionLabel> = ids[..n_bad]
        .iter()
        .map(|&landmark_id| CorruptionLabel { landmark_id, factor: lo + (hi - lo) * rng.random::<f64>() })
        .collect();
    corruption.sort_by_key(|c| c.landmark_id);
    Ok(SimSequence { ground_truth: traj.clone(), frames, landmarks, corruption })
}

/// Ground-truth depth rendered on demand from the scene.
pub struct SimGroundTruth<'a> {
    pub scene: &'a Scene,
    pub trajectory: &'a Trajectory,
    pub intrinsics: CameraIntrinsics,
}

impl GroundTruthDepth for SimGroundTruth<'_> {
    fn ground_truth(&self, frame: usize) -> Result<DepthMap, ProviderError> {
        let (_, pose) = self.trajectory.entries().get(frame).ok_or(ProviderError::MissingGroundTruth(frame))?;
        Ok(render(self.scene, pose, &self.intrinsics).depth)
    }

    fn ground_truth_subset(&self, frame: usize, pixels: &[(usize, usize)]) -> Result<DepthMap, ProviderError> {
        let (_, pose) = self.trajectory.entries().get(frame).ok_or(ProviderError::MissingGroundTruth(frame))?;
        let k = &self.intrinsics;
        let mut out = DepthMap::new_invalid(k.width() as usize, k.height() as usize);
        for &(x, y) in pixels {
            if x < out.width() && y < out.height() && out.get(x, y).is_none() {
                if let Some(hit) = cast_pixel(self.scene, pose, k, x as f64, y as f64) {
                    out.set(x, y, hit.t);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scene::{ScenePreset, Texture};

    fn spec(kind: TrajectorySpec) -> SequenceSpec {
        SequenceSpec {
            trajectory: kind,
            n_frames: 2,
            frame_rate: 10.0,
            pixel_noise: 0.0,
            landmark_count: 50,
            landmark_depth_range: default_depth_range(),
            outlier_fraction: 0.1,
            outlier_factor_range: default_factor_range(),
            seed: 3,
        }
    }

    #[test]
    fn straight_step() {
        let scene = ScenePreset::Corridor.build(Texture::default());
        let t = generate_trajectory(&spec(TrajectorySpec::Straight { start: [0.0; 3], step: [1.0, 0.0, 0.0] }), &scene)
            .unwrap();
        assert_eq!(t.pose(1).center(), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(t.pose(1).rotation(), &Mat3::identity());
    }

    #[test]
    fn orbit_radius() {
        let scene = ScenePreset::Room.build(Texture::default());
        let mut s = spec(TrajectorySpec::Orbit { radius: 2.5, start_deg: -30.0, arc_deg: 60.0, center: None });
        s.n_frames = 20;
        let t = generate_trajectory(&s, &scene).unwrap();
        for p in t.poses() {
            assert!(((p.center() - scene.centroid()).norm() - 2.5).abs() < 1e-9);
            // Centroid straight ahead.
            let c = p.transform(&scene.centroid());
            assert!(c.x.abs() < 1e-9 && c.y.abs() < 1e-9 && c.z > 0.0);
        }
    }

    #[test]
    fn noise_free_observations_are_exact_projections() {
        let scene = ScenePreset::Corridor.build(Texture::default());
        let s = spec(TrajectorySpec::Straight { start: [0.0; 3], step: [0.1, 0.0, 0.0] });
        let k = CameraIntrinsics::from_fov(160, 120, 70.0).unwrap();
        let t = generate_trajectory(&s, &scene).unwrap();
        let seq = generate_observations(&scene, &t, &k, &s).unwrap();
        assert_eq!(seq.landmarks.len(), 50);
        assert_eq!(seq.corruption.len(), 5);
        for f in &seq.frames {
            for o in &f.observations {
                let p = Vec3::from(seq.landmarks[o.track.0 as usize].position);
                let px = project(&k, t.pose(f.id), &p).unwrap();
                assert_eq!((px.u, px.v), (o.u, o.v));
            }
        }
        assert_eq!(seq, generate_observations(&scene, &t, &k, &s).unwrap());
    }
}
