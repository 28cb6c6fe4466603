//! Two-view midpoint triangulation.

use thiserror::Error;

use crate::geometry::{CameraIntrinsics, PoseSE3, Vec3, MIN_DEPTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TriangulationError {
    #[error("parallax {angle_deg:.4} deg is below {min_deg} deg")]
    LowParallax { angle_deg: f64, min_deg: f64 },
    #[error("triangulated point has non-positive depth in a view")]
    NegativeDepth,
}

/// Unit world-frame bearing through pixel `(u, v)`.
pub fn bearing(pose: &PoseSE3, k: &CameraIntrinsics, u: f64, v: f64) -> Vec3 {
    (pose.rotation().transpose() * k.ray(u, v)).normalize()
}

/// Angle in degrees between the two viewing rays.
pub fn parallax_deg(d1: &Vec3, d2: &Vec3) -> f64 {
    d1.dot(d2).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Midpoint of the common perpendicular of the two back-projected rays.
pub fn triangulate(
    obs1: (f64, f64),
    obs2: (f64, f64),
    pose1: &PoseSE3,
    pose2: &PoseSE3,
    k: &CameraIntrinsics,
    min_parallax_deg: f64,
) -> Result<Vec3, TriangulationError> {
    let d1 = bearing(pose1, k, obs1.0, obs1.1);
    let d2 = bearing(pose2, k, obs2.0, obs2.1);
    let angle_deg = parallax_deg(&d1, &d2);
    if angle_deg < min_parallax_deg || angle_deg == 0.0 {
        return Err(TriangulationError::LowParallax { angle_deg, min_deg: min_parallax_deg });
    }
    let p = midpoint(&pose1.center(), &d1, &pose2.center(), &d2).ok_or(TriangulationError::LowParallax {
        angle_deg,
        min_deg: min_parallax_deg,
    })?;
    if pose1.transform(&p).z <= MIN_DEPTH || pose2.transform(&p).z <= MIN_DEPTH {
        return Err(TriangulationError::NegativeDepth);
    }
    Ok(p)
}

/// Closest-approach midpoint of rays `c1 + s d1` and `c2 + t d2`; `None` for parallel rays.
pub fn midpoint(c1: &Vec3, d1: &Vec3, c2: &Vec3, d2: &Vec3) -> Option<Vec3> {
    let w = c1 - c2;
    let a = d1.dot(d1);
    let b = d1.dot(d2);
    let c = d2.dot(d2);
    let d = d1.dot(&w);
    let e = d2.dot(&w);
    let den = a * c - b * b;
    if den <= 1e-15 * a * c {
        return None;
    }
    let s = (b * e - c * d) / den;
    let t = (a * e - b * d) / den;
    Some(((c1 + d1 * s) + (c2 + d2 * t)) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project;

    #[test]
    fn exact_rays_recover_point() {
        let k = CameraIntrinsics::new(400.0, 400.0, 320.0, 240.0, 640, 480).unwrap();
        let p1 = PoseSE3::identity();
        let p2 = PoseSE3::from_axis_angle(Vec3::new(0.0, -0.1, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        let x = Vec3::new(0.3, -0.2, 5.0);
        let a = project(&k, &p1, &x).unwrap();
        let b = project(&k, &p2, &x).unwrap();
        let got = triangulate((a.u, a.v), (b.u, b.v), &p1, &p2, &k, 1.0).unwrap();
        assert!((got - x).norm() < 1e-9);
        assert!(matches!(
            triangulate((a.u, a.v), (a.u, a.v), &p1, &p1, &k, 1.0),
            Err(TriangulationError::LowParallax { .. })
        ));
    }
}
