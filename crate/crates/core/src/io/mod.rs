//! File formats: PFM depth, PGM masks and intensity, binary PLY clouds.

mod pfm;
mod pgm;
mod ply;

pub use pfm::{read_pfm, write_pfm};
pub use pgm::{read_intensity_pgm, read_mask_pgm, write_intensity_pgm, write_mask_pgm};
pub use ply::{read_ply, write_ply};

use std::path::Path;

use thiserror::Error;

use crate::image::DepthMap;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {msg}")]
    Malformed { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FormatError {
    pub(crate) fn malformed(path: &Path, msg: impl Into<String>) -> Self {
        FormatError::Malformed { path: path.display().to_string(), msg: msg.into() }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io { path: path.display().to_string(), source }
    }

    /// True when the underlying cause is a missing file.
    pub fn is_not_found(&self) -> bool {
        matches!(self, FormatError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

/// Writes `<stem>.pfm` and the validity sidecar `<stem>_mask.pgm`.
pub fn write_depth(stem: &Path, depth: &DepthMap) -> Result<(), FormatError> {
    write_pfm(&stem.with_extension("pfm"), depth)?;
    let mask_path = mask_path_for(stem);
    write_mask_pgm(&mask_path, depth.width(), depth.height(), depth.mask())
}

/// Reads a depth map written by [`write_depth`]. Without a sidecar mask, finite
/// positive values are taken as valid.
pub fn read_depth(stem: &Path) -> Result<DepthMap, FormatError> {
    let path = stem.with_extension("pfm");
    let depth = read_pfm(&path)?;
    let mask_path = mask_path_for(stem);
    if !mask_path.exists() {
        return Ok(depth);
    }
    let (w, h, mask) = read_mask_pgm(&mask_path)?;
    if w != depth.width() || h != depth.height() {
        return Err(FormatError::malformed(&mask_path, "mask size differs from depth map"));
    }
    DepthMap::from_values_and_mask(w, h, depth.values().to_vec(), mask)
        .map_err(|e| FormatError::malformed(&path, e.to_string()))
}

fn mask_path_for(stem: &Path) -> std::path::PathBuf {
    let name = stem.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.with_file_name(format!("{name}_mask.pgm"))
}

/// Splits a netpbm-style ASCII header into `count` tokens, skipping `#` comments.
/// Returns the tokens and the offset of the first data byte.
pub(crate) fn header_tokens(bytes: &[u8], count: usize) -> Option<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the raster.
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return None;
    }
    Some((tokens, i + 1))
}
