use std::path::Path;

use super::{header_tokens, read_bytes, write_bytes, FormatError};
use crate::image::{GrayImage, INVALID_INTENSITY};

/// Binary 8-bit PGM with 255 for valid pixels and 0 otherwise.
pub fn write_mask_pgm(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<(), FormatError> {
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend(mask.iter().map(|m| if *m { 255u8 } else { 0 }));
    write_bytes(path, &bytes)
}

pub fn read_mask_pgm(path: &Path) -> Result<(usize, usize, Vec<bool>), FormatError> {
    let (w, h, maxval, raster) = read_p5(path)?;
    if maxval > 255 {
        return Err(FormatError::malformed(path, "mask must be 8-bit"));
    }
    Ok((w, h, raster.into_iter().map(|v| v > 0).collect()))
}

/// Binary 16-bit PGM. Code 0 marks pixels without a surface hit; valid intensities
/// in `[0, 1]` map linearly onto `1..=65535`.
pub fn write_intensity_pgm(path: &Path, image: &GrayImage) -> Result<(), FormatError> {
    let mut bytes = format!("P5\n{} {}\n65535\n", image.width(), image.height()).into_bytes();
    for &v in image.data() {
        let code: u16 = if v >= 0.0 { 1 + (v.clamp(0.0, 1.0) * 65534.0).round() as u16 } else { 0 };
        bytes.extend_from_slice(&code.to_be_bytes());
    }
    write_bytes(path, &bytes)
}

pub fn read_intensity_pgm(path: &Path) -> Result<GrayImage, FormatError> {
    let (w, h, maxval, raster) = read_p5(path)?;
    let data = raster
        .into_iter()
        .map(|c| {
            if maxval == 65535 {
                if c == 0 {
                    INVALID_INTENSITY
                } else {
                    (c - 1) as f64 / 65534.0
                }
            } else {
                c as f64 / maxval as f64
            }
        })
        .collect();
    GrayImage::from_data(w, h, data).map_err(|e| FormatError::malformed(path, e.to_string()))
}

fn read_p5(path: &Path) -> Result<(usize, usize, u32, Vec<u32>), FormatError> {
    let bytes = read_bytes(path)?;
    let (tokens, offset) = header_tokens(&bytes, 4).ok_or_else(|| FormatError::malformed(path, "truncated PGM header"))?;
    if tokens[0] != "P5" {
        return Err(FormatError::malformed(path, format!("expected binary PGM 'P5', found {:?}", tokens[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| FormatError::malformed(path, format!("bad header value {s:?}")));
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(FormatError::malformed(path, "maxval out of range"));
    }
    let data = &bytes[offset..];
    let bpp = if maxval < 256 { 1 } else { 2 };
    if data.len() != w * h * bpp {
        return Err(FormatError::malformed(path, format!("expected {} raster bytes, found {}", w * h * bpp, data.len())));
    }
    let raster = if bpp == 1 {
        data.iter().map(|b| *b as u32).collect()
    } else {
        data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).collect()
    };
    Ok((w, h, maxval as u32, raster))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intensity_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.pgm");
        let img = GrayImage::from_data(3, 1, vec![0.0, 0.123456, INVALID_INTENSITY]).unwrap();
        write_intensity_pgm(&path, &img).unwrap();
        let back = read_intensity_pgm(&path).unwrap();
        assert_eq!(back.at(0, 0), 0.0);
        assert!((back.at(1, 0) - 0.123456).abs() < 1e-5);
        assert_eq!(back.at(2, 0), INVALID_INTENSITY);
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        write_mask_pgm(&path, 2, 2, &[true, false, false, true]).unwrap();
        assert_eq!(read_mask_pgm(&path).unwrap(), (2, 2, vec![true, false, false, true]));
    }
}
