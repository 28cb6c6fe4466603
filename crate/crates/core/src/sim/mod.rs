//! Deterministic synthetic world used as ground truth.

pub mod export;
pub mod preset;
pub mod render;
pub mod scene;
pub mod sequence;

pub use export::{export_sequence, Manifest, SequenceDir};
pub use preset::{filter_benchmark, Benchmark};
pub use render::{render, render_depth, render_intensity, Rendered};
pub use scene::{Primitive, Scene, ScenePreset, Texture};
pub use sequence::{
    generate_observations, generate_trajectory, CorruptionLabel, Landmark, SequenceSpec, SimGroundTruth, SimSequence,
    TrajectorySpec,
};
