//! FAST-9 segment-test corner detector with 3x3 non-maximum suppression.

use crate::image::GrayImage;

/// Bresenham circle of radius 3, clockwise from 12 o'clock, as `(dx, dy)`.
pub const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

/// Minimum contiguous arc length.
pub const ARC_LENGTH: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub u: usize,
    pub v: usize,
    pub score: f64,
}

/// Segment-test score at `(x, y)`: the summed absolute difference along the longest
/// brighter or darker arc, if that arc reaches [`ARC_LENGTH`].
fn segment_score(image: &GrayImage, x: usize, y: usize, threshold: f64) -> Option<f64> {
    let p = image.at(x, y);
    let mut diffs = [0.0f64; 16];
    let mut state = [0i8; 16];
    for (k, (dx, dy)) in CIRCLE.iter().enumerate() {
        let q = image.at((x as i32 + dx) as usize, (y as i32 + dy) as usize);
        diffs[k] = (q - p).abs();
        state[k] = if q > p + threshold {
            1
        } else if q < p - threshold {
            -1
        } else {
            0
        };
    }
    let mut best: Option<f64> = None;
    for target in [1i8, -1] {
        if state.iter().all(|s| *s == target) {
            let sum: f64 = diffs.iter().sum();
            return Some(sum);
        }
        // Walk the doubled ring so arcs that wrap past index 15 are seen whole.
        let mut run = 0usize;
        let mut sum = 0.0;
        for k in 0..32 {
            let i = k % 16;
            if state[i] == target {
                run += 1;
                sum += diffs[i];
                if run >= ARC_LENGTH && run <= 16 {
                    // Sum over the full run once it ends or the ring is exhausted.
                    let ends = state[(k + 1) % 16] != target || k == 31;
                    if ends {
                        best = Some(best.map_or(sum, |b: f64| b.max(sum)));
                    }
                }
            } else {
                run = 0;
                sum = 0.0;
            }
        }
    }
    best
}

/// FAST-9 corners with 3x3 non-maximum suppression, in raster order.
///
/// Intensity differences must strictly exceed `contrast_threshold`. Equal scores
/// inside a 3x3 window keep the earliest pixel in raster order.
pub fn fast_corners(image: &GrayImage, contrast_threshold: f64) -> Vec<Corner> {
    let (w, h) = (image.width(), image.height());
    if w < 7 || h < 7 {
        return Vec::new();
    }
    let mut scores = vec![f64::NEG_INFINITY; w * h];
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            if let Some(s) = segment_score(image, x, y, contrast_threshold) {
                scores[y * w + x] = s;
            }
        }
    }
    let mut out = Vec::new();
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let s = scores[y * w + x];
            if s == f64::NEG_INFINITY {
                continue;
            }
            let mut keep = true;
            'nbr: for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = scores[(y as i32 + dy) as usize * w + (x as i32 + dx) as usize];
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if n > s || (n == s && earlier) {
                        keep = false;
                        break 'nbr;
                    }
                }
            }
            if keep {
                out.push(Corner { u: x, v: y, score: s });
            }
        }
    }
    out
}
