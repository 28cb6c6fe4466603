use std::path::Path;

use super::{header_tokens, read_bytes, write_bytes, FormatError};
use crate::image::DepthMap;

/// Little-endian single-channel PFM (`Pf`, scale `-1.0`). Rows are stored bottom
/// to top; invalid pixels are written as 0.
pub fn write_pfm(path: &Path, depth: &DepthMap) -> Result<(), FormatError> {
    let (w, h) = (depth.width(), depth.height());
    let mut bytes = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    bytes.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            let v = depth.get(x, y).unwrap_or(0.0) as f32;
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_bytes(path, &bytes)
}

pub fn read_pfm(path: &Path) -> Result<DepthMap, FormatError> {
    let bytes = read_bytes(path)?;
    let (tokens, offset) = header_tokens(&bytes, 4).ok_or_else(|| FormatError::malformed(path, "truncated PFM header"))?;
    if tokens[0] != "Pf" {
        return Err(FormatError::malformed(path, format!("expected single-channel 'Pf', found {:?}", tokens[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| FormatError::malformed(path, format!("bad size {s:?}")));
    let w = parse(&tokens[1])?;
    let h = parse(&tokens[2])?;
    let scale: f64 = tokens[3].parse().map_err(|_| FormatError::malformed(path, "bad scale field"))?;
    if scale == 0.0 {
        return Err(FormatError::malformed(path, "scale field must be non-zero"));
    }
    let little = scale < 0.0;
    let data = &bytes[offset..];
    if data.len() != w * h * 4 {
        return Err(FormatError::malformed(path, format!("expected {} data bytes, found {}", w * h * 4, data.len())));
    }
    let mut values = vec![0.0; w * h];
    for (k, chunk) in data.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let row_from_bottom = k / w;
        let x = k % w;
        values[(h - 1 - row_from_bottom) * w + x] = v as f64;
    }
    DepthMap::from_values(w, h, values).map_err(|e| FormatError::malformed(path, e.to_string()))
}
