//! Two-view bootstrap: normalized eight-point essential matrix and cheirality test.

use nalgebra::{DMatrix, Matrix3};
use thiserror::Error;

use super::triangulate::midpoint;
use crate::geometry::{CameraIntrinsics, Mat3, PoseSE3, Vec3, MIN_DEPTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("need at least 8 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("essential matrix estimation is degenerate")]
    Degenerate,
}

/// Similarity normalizing 2D points to zero mean and mean distance sqrt(2).
fn hartley(points: &[(f64, f64)]) -> Mat3 {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (mx / n, my / n);
    let mean_dist = points.iter().map(|(x, y)| ((x - mx).powi(2) + (y - my).powi(2)).sqrt()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Mat3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

/// Essential matrix with `x2^T E x1 = 0` for normalized image coordinates.
pub fn essential_eight_point(x1: &[(f64, f64)], x2: &[(f64, f64)]) -> Result<Mat3, InitError> {
    let n = x1.len().min(x2.len());
    if n < 8 {
        return Err(InitError::TooFewCorrespondences(n));
    }
    let t1 = hartley(&x1[..n]);
    let t2 = hartley(&x2[..n]);
    let rows = n.max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for i in 0..n {
        let p = t1 * Vec3::new(x1[i].0, x1[i].1, 1.0);
        let q = t2 * Vec3::new(x2[i].0, x2[i].1, 1.0);
        let row = [q.x * p.x, q.x * p.y, q.x, q.y * p.x, q.y * p.y, q.y, p.x, p.y, 1.0];
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(InitError::Degenerate)?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .ok_or(InitError::Degenerate)?;
    let e = v_t.row(min_idx);
    let f = Matrix3::new(e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8]);
    let e = t2.transpose() * f * t1;
    let svd = e.svd(true, true);
    let (u, v_t) = (svd.u.ok_or(InitError::Degenerate)?, svd.v_t.ok_or(InitError::Degenerate)?);
    Ok(u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0)) * v_t)
}

/// The four `(R, t)` factorizations of an essential matrix, `|t| = 1`.
pub fn decompose_essential(e: &Mat3) -> Result<[(Mat3, Vec3); 4], InitError> {
    let svd = e.svd(true, true);
    let (mut u, mut v_t) = (svd.u.ok_or(InitError::Degenerate)?, svd.v_t.ok_or(InitError::Degenerate)?);
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * v_t;
    let r2 = u * w.transpose() * v_t;
    let t = u.column(2).into_owned().normalize();
    Ok([(r1, t), (r1, -t), (r2, t), (r2, -t)])
}

/// Relative pose of view 2 with respect to view 1 (unit baseline) from pixel correspondences,
/// and the number of correspondences in front of both cameras.
pub fn relative_pose(
    obs1: &[(f64, f64)],
    obs2: &[(f64, f64)],
    k: &CameraIntrinsics,
) -> Result<(PoseSE3, usize), InitError> {
    let norm = |o: &(f64, f64)| {
        let r = k.ray(o.0, o.1);
        (r.x, r.y)
    };
    let x1: Vec<(f64, f64)> = obs1.iter().map(norm).collect();
    let x2: Vec<(f64, f64)> = obs2.iter().map(norm).collect();
    let e = essential_eight_point(&x1, &x2)?;
    let mut best: Option<(PoseSE3, usize)> = None;
    for (r, t) in decompose_essential(&e)? {
        let Ok(pose) = PoseSE3::new(r, t) else { continue };
        let c2 = pose.center();
        let r_wc = r.transpose();
        let good = x1
            .iter()
            .zip(&x2)
            .filter(|(a, b)| {
                let d1 = Vec3::new(a.0, a.1, 1.0);
                let d2 = r_wc * Vec3::new(b.0, b.1, 1.0);
                midpoint(&Vec3::zeros(), &d1, &c2, &d2)
                    .is_some_and(|p| p.z > MIN_DEPTH && pose.transform(&p).z > MIN_DEPTH)
            })
            .count();
        if best.as_ref().is_none_or(|(_, g)| good > *g) {
            best = Some((pose, good));
        }
    }
    best.ok_or(InitError::Degenerate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project;

    #[test]
    fn recovers_relative_pose() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let truth = PoseSE3::from_axis_angle(Vec3::new(0.01, 0.04, -0.02), Vec3::new(-0.6, 0.1, 0.05));
        let mut o1 = Vec::new();
        let mut o2 = Vec::new();
        for i in 0..40 {
            let f = i as f64;
            let p = Vec3::new((f * 0.7).sin() * 2.0, (f * 1.3).cos(), 5.0 + 3.0 * (f * 0.29).sin());
            let a = project(&k, &PoseSE3::identity(), &p).unwrap();
            let b = project(&k, &truth, &p).unwrap();
            o1.push((a.u, a.v));
            o2.push((b.u, b.v));
        }
        let (pose, good) = relative_pose(&o1, &o2, &k).unwrap();
        assert_eq!(good, 40);
        let scale = truth.translation().norm();
        assert!((pose.rotation() - truth.rotation()).amax() < 1e-9);
        assert!((pose.translation() * scale - truth.translation()).amax() < 1e-9);
    }
}
