//! Dense depth maps, intensity images and sparse depth samples.

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("buffer length {got} does not match {width}x{height}")]
    BadBufferLength { width: usize, height: usize, got: usize },
    #[error("sample ({u}, {v}) outside {width}x{height}")]
    OutOfBounds { u: u32, v: u32, width: usize, height: usize },
    #[error("non-positive sparse depth {z} at ({u}, {v})")]
    NonPositiveDepth { u: u32, v: u32, z: f64 },
    #[error("duplicate sparse sample at ({u}, {v})")]
    DuplicatePixel { u: u32, v: u32 },
}

/// Bilinear interpolation over a grid accessor; `None` if any neighbor with
/// non-zero weight is missing or the location is outside the grid.
fn bilinear_with<F: Fn(usize, usize) -> Option<f64>>(width: usize, height: usize, u: f64, v: f64, get: F) -> Option<f64> {
    if !(u >= 0.0 && v >= 0.0) || u > (width - 1) as f64 || v > (height - 1) as f64 {
        return None;
    }
    let x0 = u.floor() as usize;
    let y0 = v.floor() as usize;
    let ax = u - x0 as f64;
    let ay = v - y0 as f64;
    let mut acc = 0.0;
    for (dy, wy) in [(0usize, 1.0 - ay), (1, ay)] {
        if wy == 0.0 {
            continue;
        }
        for (dx, wx) in [(0usize, 1.0 - ax), (1, ax)] {
            if wx == 0.0 {
                continue;
            }
            acc += wx * wy * get(x0 + dx, y0 + dy)?;
        }
    }
    Some(acc)
}

/// Per-pixel depth with a validity mask. Valid values are finite and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new_invalid(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height], valid: vec![false; width * height] }
    }

    /// Pixels holding a finite positive value become valid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ImageError> {
        if values.len() != width * height {
            return Err(ImageError::BadBufferLength { width, height, got: values.len() });
        }
        let valid = values.iter().map(|z| z.is_finite() && *z > 0.0).collect();
        Ok(Self { width, height, values, valid })
    }

    /// Pixels are valid only where `mask` is set and the value is finite and positive.
    pub fn from_values_and_mask(width: usize, height: usize, values: Vec<f64>, mask: Vec<bool>) -> Result<Self, ImageError> {
        let mut d = Self::from_values(width, height, values)?;
        if mask.len() != width * height {
            return Err(ImageError::BadBufferLength { width, height, got: mask.len() });
        }
        for (v, m) in d.valid.iter_mut().zip(mask) {
            *v &= m;
        }
        Ok(d)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn same_dims(&self, other: &DepthMap) -> Result<(), ImageError> {
        if self.width != other.width || self.height != other.height {
            return Err(ImageError::DimensionMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let i = self.index(x, y);
        self.valid[i].then_some(self.values[i])
    }

    pub fn get_index(&self, i: usize) -> Option<f64> {
        self.valid[i].then_some(self.values[i])
    }

    /// Stores `z`; non-finite or non-positive values mark the pixel invalid.
    pub fn set(&mut self, x: usize, y: usize, z: f64) {
        let i = self.index(x, y);
        self.set_index(i, z);
    }

    pub fn set_index(&mut self, i: usize, z: f64) {
        if z.is_finite() && z > 0.0 {
            self.values[i] = z;
            self.valid[i] = true;
        } else {
            self.values[i] = 0.0;
            self.valid[i] = false;
        }
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        let i = self.index(x, y);
        self.values[i] = 0.0;
        self.valid[i] = false;
    }

    pub fn count_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// `(x, y, z)` for every valid pixel in raster order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.width;
        self.values
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|(_, (_, ok))| **ok)
            .map(move |(i, (z, _))| (i % w, i / w, *z))
    }

    /// Upper median of the valid values.
    pub fn median_valid(&self) -> Option<f64> {
        let mut vals: Vec<f64> = self.iter_valid().map(|(_, _, z)| z).collect();
        if vals.is_empty() {
            return None;
        }
        let mid = vals.len() / 2;
        let (_, m, _) = vals.select_nth_unstable_by(mid, f64::total_cmp);
        Some(*m)
    }

    /// Bilinear sample at sub-pixel `(u, v)`; `None` when any supporting pixel is invalid.
    pub fn bilinear(&self, u: f64, v: f64) -> Option<f64> {
        bilinear_with(self.width, self.height, u, v, |x, y| self.get(x, y))
    }

    /// Nearest valid pixel to `(u, v)` whose center is within `radius` pixels (Chebyshev).
    pub fn nearest_valid(&self, u: f64, v: f64, radius: usize) -> Option<f64> {
        let cx = u.round();
        let cy = v.round();
        let r = radius as i64;
        let mut best: Option<(f64, f64)> = None;
        for dy in -r..=r {
            for dx in -r..=r {
                let x = cx as i64 + dx;
                let y = cy as i64 + dy;
                if x < 0 || y < 0 {
                    continue;
                }
                if let Some(z) = self.get(x as usize, y as usize) {
                    let d2 = (x as f64 - u).powi(2) + (y as f64 - v).powi(2);
                    if best.is_none_or(|(bd, _)| d2 < bd) {
                        best = Some((d2, z));
                    }
                }
            }
        }
        best.map(|(_, z)| z)
    }

    /// Multiplies every valid value by `factor`; the mask is unchanged.
    pub fn scaled(&self, factor: f64) -> DepthMap {
        let mut out = self.clone();
        for (z, ok) in out.values.iter_mut().zip(&out.valid) {
            if *ok {
                *z *= factor;
            }
        }
        out
    }
}

/// Intensity value for pixels whose ray hits nothing.
pub const INVALID_INTENSITY: f64 = -1.0;

/// Single-channel intensity image, valid values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: f64) -> Self {
        Self { width, height, data: vec![fill; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::BadBufferLength { width, height, got: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn is_valid_at(&self, x: usize, y: usize) -> bool {
        self.at(x, y) >= 0.0
    }

    pub fn bilinear(&self, u: f64, v: f64) -> Option<f64> {
        bilinear_with(self.width, self.height, u, v, |x, y| {
            let i = self.at(x, y);
            (i >= 0.0).then_some(i)
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage { width: self.width, height: self.height, data: self.data.iter().map(|v| f(*v)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseSample {
    pub u: u32,
    pub v: u32,
    pub z: f64,
}

/// Sparse `(pixel, depth)` samples bound to an image size.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDepthMap {
    width: usize,
    height: usize,
    samples: Vec<SparseSample>,
}

impl SparseDepthMap {
    pub fn new(width: usize, height: usize, samples: Vec<SparseSample>) -> Result<Self, ImageError> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.u as usize >= width || s.v as usize >= height {
                return Err(ImageError::OutOfBounds { u: s.u, v: s.v, width, height });
            }
            if !(s.z > 0.0 && s.z.is_finite()) {
                return Err(ImageError::NonPositiveDepth { u: s.u, v: s.v, z: s.z });
            }
            if !seen.insert((s.u, s.v)) {
                return Err(ImageError::DuplicatePixel { u: s.u, v: s.v });
            }
        }
        Ok(Self { width, height, samples })
    }

    /// Rounds sub-pixel samples to pixels, dropping out-of-bounds, non-positive and
    /// repeated pixels (first occurrence wins).
    pub fn from_subpixel(width: usize, height: usize, points: impl IntoIterator<Item = (f64, f64, f64)>) -> Self {
        let mut seen = HashSet::new();
        let mut samples = Vec::new();
        for (u, v, z) in points {
            let (x, y) = (u.round(), v.round());
            if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 || !(z > 0.0 && z.is_finite()) {
                continue;
            }
            let (x, y) = (x as u32, y as u32);
            if seen.insert((x, y)) {
                samples.push(SparseSample { u: x, v: y, z });
            }
        }
        Self { width, height, samples }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn samples(&self) -> &[SparseSample] {
        &self.samples
    }
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub(crate) fn with_samples(&self, samples: Vec<SparseSample>) -> Self {
        Self { width: self.width, height: self.height, samples }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_values_are_masked() {
        let d = DepthMap::from_values(2, 2, vec![1.0, 0.0, f64::NAN, -2.0]).unwrap();
        assert_eq!(d.count_valid(), 1);
        assert_eq!(d.get(0, 0), Some(1.0));
        assert_eq!(d.get(1, 0), None);
        assert!(DepthMap::from_values(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn bilinear_interpolates_and_respects_mask() {
        let d = DepthMap::from_values(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.bilinear(0.5, 0.5), Some(2.5));
        assert_eq!(d.bilinear(1.0, 1.0), Some(4.0));
        assert_eq!(d.bilinear(1.0, 0.0), Some(2.0));
        assert_eq!(d.bilinear(1.5, 0.0), None);
        let d = DepthMap::from_values(2, 2, vec![1.0, 0.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.bilinear(0.5, 0.5), None);
        assert_eq!(d.bilinear(0.0, 0.5), Some(2.0));
        assert_eq!(d.nearest_valid(0.9, 0.1, 1), Some(1.0));
    }

    #[test]
    fn upper_median() {
        let d = DepthMap::from_values(4, 1, vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(d.median_valid(), Some(3.0));
    }

    #[test]
    fn sparse_invariants() {
        let s = |u, v, z| SparseSample { u, v, z };
        assert!(SparseDepthMap::new(4, 4, vec![s(0, 0, 1.0), s(3, 3, 2.0)]).is_ok());
        assert!(matches!(SparseDepthMap::new(4, 4, vec![s(4, 0, 1.0)]), Err(ImageError::OutOfBounds { .. })));
        assert!(matches!(SparseDepthMap::new(4, 4, vec![s(0, 0, 0.0)]), Err(ImageError::NonPositiveDepth { .. })));
        assert!(matches!(
            SparseDepthMap::new(4, 4, vec![s(1, 1, 1.0), s(1, 1, 2.0)]),
            Err(ImageError::DuplicatePixel { .. })
        ));
        let sp = SparseDepthMap::from_subpixel(4, 4, vec![(0.4, 0.2, 1.0), (0.1, 0.0, 5.0), (9.0, 0.0, 1.0)]);
        assert_eq!(sp.samples(), &[s(0, 0, 1.0)]);
    }
}
