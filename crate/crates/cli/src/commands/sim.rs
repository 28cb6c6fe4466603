use std::path::{Path, PathBuf};

use depthvo_core::sim::{export_sequence, generate_observations, generate_trajectory};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const CONFIG_COPY: &str = "config.json";

/// Renders and writes the sequence directory; returns the manifest path.
pub fn generate(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let scene = cfg.scene.build();
    let traj = generate_trajectory(&cfg.sequence, &scene).map_err(|e| CliError::Config(e.to_string()))?;
    let seq = generate_observations(&scene, &traj, &cfg.intrinsics, &cfg.sequence)
        .map_err(|e| CliError::Config(e.to_string()))?;
    log::info!("{} frames, {} landmarks, {} corrupted", seq.frames.len(), seq.landmarks.len(), seq.corruption.len());
    let manifest = export_sequence(out, &scene, &cfg.intrinsics, &cfg.sequence, &seq).map_err(|e| CliError::Io(e.to_string()))?;
    let copy = out.join(CONFIG_COPY);
    let stored = RunConfig { output_dir: None, ..cfg.clone() };
    std::fs::write(&copy, stored.to_json()).map_err(|e| CliError::io(&copy, e))?;
    Ok(manifest)
}
