//! The labeled benchmark used to measure the near-far filter: a sideways pass along
//! the corridor with 10% of the landmarks depth-corrupted.

use serde::{Deserialize, Serialize};

use super::scene::{Scene, ScenePreset, Texture};
use super::sequence::{SequenceSpec, TrajectorySpec};
use crate::geometry::CameraIntrinsics;
use crate::provider::OracleConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub scene: Scene,
    pub intrinsics: CameraIntrinsics,
    pub sequence: SequenceSpec,
    pub oracle: OracleConfig,
}

pub fn filter_benchmark(seed: u64) -> Benchmark {
    Benchmark {
        scene: ScenePreset::Corridor.build(Texture::default()),
        intrinsics: CameraIntrinsics::from_fov(640, 480, 70.0).expect("valid field of view"),
        sequence: SequenceSpec {
            trajectory: TrajectorySpec::Straight { start: [-3.0, 0.0, 0.0], step: [0.05, 0.0, 0.015] },
            n_frames: 200,
            frame_rate: 10.0,
            pixel_noise: 0.25,
            landmark_count: 500,
            landmark_depth_range: [1.5, 40.0],
            outlier_fraction: 0.1,
            outlier_factor_range: [1.5, 3.0],
            seed,
        },
        oracle: OracleConfig {
            affine_scale: 1.7,
            affine_shift: 0.3,
            noise_sigma: 0.05,
            outlier_fraction: 0.0,
            outlier_factor_range: (1.5, 3.0),
            seed,
        },
    }
}
