//! Visual odometry: robust pose, triangulation, bootstrap and the tracking loop.

pub mod init;
pub mod pipeline;
pub mod pose;
pub mod triangulate;

pub use pipeline::{
    keyframe_decision, replay_removals, track_sequence, FilterConfig, InitConfig, Keyframe, KeyframeDepth, KeyframePolicy,
    RemovalSchedule, RunStatus, SequenceInput, VoConfig, VoError, VoRun,
};
pub use pose::{estimate_pose, huber, Correspondence, PoseConfig, PoseError, PoseEstimate};
pub use triangulate::{triangulate, TriangulationError};
