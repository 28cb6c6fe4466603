use std::path::Path;

use super::{read_bytes, write_bytes, FormatError};
use crate::mapping::PointCloud;

/// Binary little-endian PLY with float32 `x y z` and, when present, `intensity`.
pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<(), FormatError> {
    let with_intensity = cloud.intensities().is_some();
    let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", cloud.len());
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if with_intensity {
        header.push_str("property float intensity\n");
    }
    header.push_str("end_header\n");
    let mut bytes = header.into_bytes();
    for (i, p) in cloud.points().iter().enumerate() {
        for c in [p.x, p.y, p.z] {
            bytes.extend_from_slice(&(c as f32).to_le_bytes());
        }
        if let Some(int) = cloud.intensities() {
            bytes.extend_from_slice(&(int[i] as f32).to_le_bytes());
        }
    }
    write_bytes(path, &bytes)
}

/// Reads files produced by [`write_ply`].
pub fn read_ply(path: &Path) -> Result<PointCloud, FormatError> {
    let bytes = read_bytes(path)?;
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| FormatError::malformed(path, "missing end_header"))?;
    let header = String::from_utf8_lossy(&bytes[..end]);
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(FormatError::malformed(path, "missing 'ply' magic"));
    }
    let mut count = None;
    let mut props = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "binary_little_endian", "1.0"] => {}
            ["format", other, ..] => return Err(FormatError::malformed(path, format!("unsupported format {other}"))),
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| FormatError::malformed(path, "bad vertex count"))?)
            }
            ["property", "float", name] => props.push(name.to_string()),
            ["comment", ..] => {}
            _ => return Err(FormatError::malformed(path, format!("unsupported header line {line:?}"))),
        }
    }
    let count = count.ok_or_else(|| FormatError::malformed(path, "missing vertex element"))?;
    let with_intensity = match props.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "y", "z"] => false,
        ["x", "y", "z", "intensity"] => true,
        _ => return Err(FormatError::malformed(path, "unexpected vertex properties")),
    };
    let stride = props.len() * 4;
    let data = &bytes[end + marker.len()..];
    if data.len() != count * stride {
        return Err(FormatError::malformed(path, "vertex data length mismatch"));
    }
    let mut cloud = PointCloud::new(with_intensity);
    for rec in data.chunks_exact(stride) {
        let f = |k: usize| f32::from_le_bytes([rec[4 * k], rec[4 * k + 1], rec[4 * k + 2], rec[4 * k + 3]]) as f64;
        let p = nalgebra::Vector3::new(f(0), f(1), f(2));
        cloud.push(p, with_intensity.then(|| f(3)));
    }
    Ok(cloud)
}
