//! Run configuration: one JSON document for every subcommand.

use std::path::{Path, PathBuf};

use depthvo_core::provider::OracleConfig;
use depthvo_core::sim::{filter_benchmark, Scene, ScenePreset, SequenceSpec, Texture};
use depthvo_core::vo::VoConfig;
use depthvo_core::CameraIntrinsics;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;
pub const SCHEMA: &str = include_str!("../../../schema/run-config.v1.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub preset: ScenePreset,
    #[serde(default)]
    pub texture: Texture,
}

impl SceneConfig {
    pub fn build(&self) -> Scene {
        self.preset.build(self.texture)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    pub delta: f64,
    pub gamma: f64,
    /// Voxel edge for downsampling; 0 keeps every point.
    #[serde(default)]
    pub voxel: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig { delta: 0.5, gamma: 0.1, voxel: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub intrinsics: CameraIntrinsics,
    pub scene: SceneConfig,
    pub sequence: SequenceSpec,
    pub provider: OracleConfig,
    #[serde(default)]
    pub vo: VoConfig,
    #[serde(default)]
    pub mapping: MappingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    /// A small corridor sequence with 10% corrupted landmarks, seed 7.
    fn default() -> Self {
        let b = filter_benchmark(7);
        let sequence = SequenceSpec { n_frames: 120, landmark_count: 400, ..b.sequence };
        RunConfig {
            version: CONFIG_VERSION,
            intrinsics: CameraIntrinsics::from_fov(320, 240, 70.0).expect("valid field of view"),
            scene: SceneConfig { preset: ScenePreset::Corridor, texture: Texture::default() },
            sequence,
            provider: b.oracle,
            vo: VoConfig::default(),
            mapping: MappingConfig::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
            CliError::Config(format!("{origin}:{}:{}: {msg}", e.line(), e.column()))
        })?;
        cfg.validate().map_err(|m| CliError::Config(format!("{origin}: {m}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.version != CONFIG_VERSION {
            return Err(format!("unsupported config version {}, expected {CONFIG_VERSION}", self.version));
        }
        self.sequence.validate().map_err(|e| e.to_string())?;
        self.provider.validate().map_err(|e| e.to_string())?;
        let m = &self.mapping;
        for (name, v) in [("mapping.delta", m.delta), ("mapping.gamma", m.gamma), ("mapping.voxel", m.voxel)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a non-negative number"));
            }
        }
        let t = &self.scene.texture;
        if !(t.frequency > 0.0 && t.amplitude >= 0.0 && t.amplitude <= 0.5) {
            return Err("scene.texture needs frequency > 0 and amplitude in [0, 0.5]".into());
        }
        let kf = &self.vo.keyframe;
        if !(kf.translation_fraction > 0.0) || kf.max_gap == 0 {
            return Err("vo.keyframe needs translation_fraction > 0 and max_gap >= 1".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
