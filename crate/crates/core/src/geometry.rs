//! Pinhole camera, rigid and similarity transforms, and the 7DoF trajectory aligner.
//!
//! Poses are stored world-to-camera (`R_cw`, `t_cw`): a world point `p` lands in the
//! camera frame at `R_cw * p + t_cw`. The camera looks down +z, the image origin is
//! the top-left corner and pixel centers sit on integer coordinates.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector6, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::Trajectory;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Camera-frame depths at or below this are treated as on/behind the image plane.
pub const MIN_DEPTH: f64 = 1e-12;

/// Orthonormality tolerance for rotation matrices.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-positive depth {z}")]
    NonPositiveDepth { z: f64 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not orthonormal with det +1 (deviation {deviation:e})")]
    InvalidRotation { deviation: f64 },
    #[error("invalid similarity scale {0}")]
    InvalidScale(f64),
    #[error("too few poses: need at least 3, got {0}")]
    TooFewPoses(usize),
    #[error("trajectory lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate configuration: positions are collinear or coincident")]
    DegenerateConfiguration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics", into = "RawIntrinsics")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = GeometryError;

    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl From<CameraIntrinsics> for RawIntrinsics {
    fn from(k: CameraIntrinsics) -> Self {
        RawIntrinsics { fx: k.fx, fy: k.fy, cx: k.cx, cy: k.cy, width: k.width, height: k.height }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fx.is_finite() && fy > 0.0 && fy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(format!("focal lengths must be positive, got fx={fx} fy={fy}")));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics("image size must be non-zero".into()));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Centered principal point with the given horizontal field of view in degrees.
    pub fn from_fov(width: u32, height: u32, hfov_deg: f64) -> Result<Self, GeometryError> {
        let f = 0.5 * width as f64 / (0.5 * hfov_deg.to_radians()).tan();
        Self::new(f, f, 0.5 * width as f64, 0.5 * height as f64, width, height)
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// `0 <= u < width && 0 <= v < height`.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// Same camera at a different resolution, scaling focal lengths and principal point.
    pub fn rescaled(&self, width: u32, height: u32) -> Result<Self, GeometryError> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height)
    }

    /// Unit-depth ray direction (x/z, y/z, 1) through pixel (u, v).
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Sub-pixel image location with optional depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
    pub z: Option<f64>,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v, z: None }
    }

    pub fn with_depth(u: f64, v: f64, z: f64) -> Self {
        Self { u, v, z: Some(z) }
    }
}

/// Rigid world-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE3 {
    rotation: Mat3,
    translation: Vec3,
}

impl Default for PoseSE3 {
    fn default() -> Self {
        Self::identity()
    }
}

/// Largest entry of `|RᵀR - I|`, or infinity when det(R) is not positive.
pub fn rotation_deviation(r: &Mat3) -> f64 {
    if !(r.determinant() > 0.0) {
        return f64::INFINITY;
    }
    (r.transpose() * r - Mat3::identity()).abs().max()
}

/// Nearest rotation in the Frobenius sense (polar factor via SVD).
pub fn orthonormalize(r: &Mat3) -> Mat3 {
    let svd = SVD::new(*r, true, true);
    let u = svd.u.expect("3x3 SVD always yields U");
    let v_t = svd.v_t.expect("3x3 SVD always yields Vᵀ");
    let mut d = Mat3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

pub fn skew(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rodrigues' formula for the SO(3) exponential.
pub fn so3_exp(w: &Vec3) -> Mat3 {
    let theta2 = w.norm_squared();
    let k = skew(w);
    if theta2 < 1e-16 {
        return Mat3::identity() + k + 0.5 * k * k;
    }
    let theta = theta2.sqrt();
    Mat3::identity() + (theta.sin() / theta) * k + ((1.0 - theta.cos()) / theta2) * (k * k)
}

/// Rotation angle of `r` in radians.
pub fn rotation_angle(r: &Mat3) -> f64 {
    ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
}

impl PoseSE3 {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        let deviation = rotation_deviation(&rotation);
        if !(deviation < ROTATION_TOL) || !translation.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::InvalidRotation { deviation });
        }
        Ok(Self { rotation, translation })
    }

    /// Builds a pose from an axis-angle rotation vector and translation.
    pub fn from_axis_angle(axis_angle: Vec3, translation: Vec3) -> Self {
        Self { rotation: so3_exp(&axis_angle), translation }
    }

    /// World-to-camera pose for a camera at `center` whose camera-to-world rotation is `r_wc`.
    pub fn from_center(r_wc: Mat3, center: Vec3) -> Result<Self, GeometryError> {
        let r_cw = r_wc.transpose();
        Self::new(r_cw, -(r_cw * center))
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn transform(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        let mut rotation = self.rotation * other.rotation;
        if rotation_deviation(&rotation) > ROTATION_TOL {
            rotation = orthonormalize(&rotation);
        }
        PoseSE3 { rotation, translation: self.rotation * other.translation + self.translation }
    }

    pub fn inverse(&self) -> PoseSE3 {
        let rt = self.rotation.transpose();
        PoseSE3 { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// SE(3) exponential of `xi = (omega, v)`.
    pub fn exp(xi: &Vector6<f64>) -> PoseSE3 {
        let w = Vec3::new(xi[0], xi[1], xi[2]);
        let v = Vec3::new(xi[3], xi[4], xi[5]);
        let theta2 = w.norm_squared();
        let k = skew(&w);
        let left_jacobian = if theta2 < 1e-16 {
            Mat3::identity() + 0.5 * k + (k * k) / 6.0
        } else {
            let theta = theta2.sqrt();
            Mat3::identity()
                + ((1.0 - theta.cos()) / theta2) * k
                + ((theta - theta.sin()) / (theta2 * theta)) * (k * k)
        };
        PoseSE3 { rotation: so3_exp(&w), translation: left_jacobian * v }
    }

    /// Left retraction `exp(xi) ∘ self`.
    pub fn retract_left(&self, xi: &Vector6<f64>) -> PoseSE3 {
        PoseSE3::exp(xi).compose(self)
    }

    /// Rotation angle (radians) and translation distance between two poses.
    pub fn distance(&self, other: &PoseSE3) -> (f64, f64) {
        let rel = self.compose(&other.inverse());
        (rotation_angle(&rel.rotation), (self.center() - other.center()).norm())
    }
}

/// Pinhole projection of a world point through `pose`.
pub fn project(k: &CameraIntrinsics, pose: &PoseSE3, p_world: &Vec3) -> Result<PixelPoint, GeometryError> {
    let pc = pose.transform(p_world);
    let (u, v) = project_transferred(&pc, k)?;
    Ok(PixelPoint::with_depth(u, v, pc.z))
}

/// Back-projects a pixel with depth into the camera frame.
pub fn unproject(k: &CameraIntrinsics, pixel: &PixelPoint) -> Result<Vec3, GeometryError> {
    let z = pixel.z.unwrap_or(0.0);
    if !(z > 0.0) {
        return Err(GeometryError::NonPositiveDepth { z });
    }
    Ok(k.ray(pixel.u, pixel.v) * z)
}

/// Moves a point from the `pose_from` camera frame into the `pose_to` camera frame.
///
/// Written out as `R_to R_fromᵀ p + R_to t_w,from + t_to` with `t_w,from = -R_fromᵀ t_from`.
pub fn transfer_point(pose_from: &PoseSE3, pose_to: &PoseSE3, p_from: &Vec3) -> Vec3 {
    let r_from_inv = pose_from.rotation.transpose();
    let t_w_from = -(r_from_inv * pose_from.translation);
    pose_to.rotation * (r_from_inv * p_from) + pose_to.rotation * t_w_from + pose_to.translation
}

/// Projects a camera-frame point to pixel coordinates.
pub fn project_transferred(p: &Vec3, k: &CameraIntrinsics) -> Result<(f64, f64), GeometryError> {
    if !(p.z > MIN_DEPTH) {
        return Err(GeometryError::NonPositiveDepth { z: p.z });
    }
    Ok((p.x / p.z * k.fx + k.cx, p.y / p.z * k.fy + k.cy))
}

/// Similarity transform `p -> s R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim3 {
    scale: f64,
    rotation: Mat3,
    translation: Vec3,
}

impl Sim3 {
    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(scale: f64, rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(GeometryError::InvalidScale(scale));
        }
        let deviation = rotation_deviation(&rotation);
        if !(deviation < ROTATION_TOL) {
            return Err(GeometryError::InvalidRotation { deviation });
        }
        Ok(Self { scale, rotation, translation })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }
    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn inverse(&self) -> Sim3 {
        let rt = self.rotation.transpose();
        Sim3 { scale: 1.0 / self.scale, rotation: rt, translation: -(rt * self.translation) / self.scale }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Sim3) -> Sim3 {
        Sim3 {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    /// Re-expresses a world-to-camera pose in the transformed world frame.
    ///
    /// The camera center moves with the similarity; orientation picks up the rotation.
    pub fn transform_pose(&self, pose: &PoseSE3) -> PoseSE3 {
        let center = self.apply(&pose.center());
        let r_cw = pose.rotation * self.rotation.transpose();
        PoseSE3 { rotation: r_cw, translation: -(r_cw * center) }
    }
}

/// Least-squares similarity mapping `src` onto `dst` (Umeyama's closed form).
pub fn umeyama_points(src: &[Vec3], dst: &[Vec3]) -> Result<Sim3, GeometryError> {
    umeyama_fit(src, dst, true)
}

/// Least-squares similarity like [`umeyama_points`], but collinear sources are accepted:
/// the rotation about the line is then one of many equally good ones, and the
/// residual is still the minimum.
pub fn umeyama_least_squares(src: &[Vec3], dst: &[Vec3]) -> Result<Sim3, GeometryError> {
    umeyama_fit(src, dst, false)
}

fn umeyama_fit(src: &[Vec3], dst: &[Vec3], require_plane: bool) -> Result<Sim3, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch(src.len(), dst.len()));
    }
    let n = src.len();
    if n < 3 {
        return Err(GeometryError::TooFewPoses(n));
    }
    let inv_n = 1.0 / n as f64;
    let mu_s = src.iter().fold(Vec3::zeros(), |a, p| a + p) * inv_n;
    let mu_d = dst.iter().fold(Vec3::zeros(), |a, p| a + p) * inv_n;

    let mut cross = Mat3::zeros();
    let mut src_cov = Mat3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let sc = s - mu_s;
        let dc = d - mu_d;
        cross += dc * sc.transpose();
        src_cov += sc * sc.transpose();
        var_s += sc.norm_squared();
    }
    cross *= inv_n;
    src_cov *= inv_n;
    var_s *= inv_n;

    // Rank < 2 means a line or a point: rotation about it is unobservable.
    let sv = src_cov.symmetric_eigenvalues();
    let mut sv: Vec<f64> = sv.iter().map(|x| x.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || (require_plane && sv[1] <= 1e-12 * sv[0]) {
        return Err(GeometryError::DegenerateConfiguration);
    }

    let svd = SVD::new(cross, true, true);
    let u = svd.u.expect("3x3 SVD always yields U");
    let v_t = svd.v_t.expect("3x3 SVD always yields Vᵀ");
    let mut s = Mat3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rotation = u * s * v_t;
    let d = svd.singular_values;
    let trace_ds = d[0] * s[(0, 0)] + d[1] * s[(1, 1)] + d[2] * s[(2, 2)];
    let scale = trace_ds / var_s;
    let translation = mu_d - scale * (rotation * mu_s);
    Sim3::new(scale, orthonormalize(&rotation), translation)
}

/// 7DoF alignment of the estimated camera centers onto the ground-truth ones.
///
/// Trajectories must already be associated index by index.
pub fn umeyama_sim3(traj_est: &Trajectory, traj_gt: &Trajectory) -> Result<Sim3, GeometryError> {
    if traj_est.len() != traj_gt.len() {
        return Err(GeometryError::LengthMismatch(traj_est.len(), traj_gt.len()));
    }
    umeyama_points(&traj_est.positions(), &traj_gt.positions())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> PoseSE3 {
        let w = Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let t = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        PoseSE3::from_axis_angle(w, t)
    }

    #[test]
    fn project_examples() {
        let k = k();
        let p = project(&k, &PoseSE3::identity(), &Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!((p.u, p.v, p.z), (320.0, 240.0, Some(2.0)));
        let p = project(&k, &PoseSE3::identity(), &Vec3::new(1.0, 0.0, 2.0)).unwrap();
        assert_eq!((p.u, p.v, p.z), (570.0, 240.0, Some(2.0)));
        let pose = PoseSE3::new(Mat3::identity(), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let p = project(&k, &pose, &Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!((p.u, p.v, p.z), (320.0, 240.0, Some(2.0)));
        assert!(matches!(
            project(&k, &PoseSE3::identity(), &Vec3::new(0.0, 0.0, -1.0)),
            Err(GeometryError::NonPositiveDepth { .. })
        ));
        assert!(project(&k, &PoseSE3::identity(), &Vec3::new(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn out_of_bounds_projection_is_returned() {
        let p = project(&k(), &PoseSE3::identity(), &Vec3::new(10.0, 0.0, 1.0)).unwrap();
        assert!(!k().contains(p.u, p.v));
    }

    #[test]
    fn unproject_examples() {
        let k = k();
        assert_eq!(unproject(&k, &PixelPoint::with_depth(320.0, 240.0, 3.0)).unwrap(), Vec3::new(0.0, 0.0, 3.0));
        assert_eq!(unproject(&k, &PixelPoint::with_depth(570.0, 240.0, 2.0)).unwrap(), Vec3::new(1.0, 0.0, 2.0));
        assert_eq!(
            unproject(&k, &PixelPoint::with_depth(320.0, 240.0, 0.0)),
            Err(GeometryError::NonPositiveDepth { z: 0.0 })
        );
        assert!(unproject(&k, &PixelPoint::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn transfer_examples() {
        let a = PoseSE3::from_axis_angle(Vec3::new(0.1, -0.2, 0.3), Vec3::new(1.0, 2.0, 3.0));
        let p = Vec3::new(0.3, -0.4, 5.0);
        assert!((transfer_point(&a, &a, &p) - p).amax() < 1e-12);
        let to = PoseSE3::new(Mat3::identity(), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(transfer_point(&PoseSE3::identity(), &to, &Vec3::new(0.0, 0.0, 5.0)), Vec3::new(1.0, 0.0, 5.0));
    }

    #[test]
    fn transfer_matches_homogeneous_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let p = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let m = b.to_homogeneous() * a.to_homogeneous().try_inverse().unwrap();
            let expected = (m * p.push(1.0)).xyz();
            assert!((transfer_point(&a, &b, &p) - expected).amax() < 1e-12);
        }
    }

    #[test]
    fn project_transferred_examples() {
        let k = k();
        assert_eq!(project_transferred(&Vec3::new(0.0, 0.0, 4.0), &k).unwrap(), (320.0, 240.0));
        assert_eq!(project_transferred(&Vec3::new(2.0, 0.0, 4.0), &k).unwrap(), (570.0, 240.0));
        assert!(project_transferred(&Vec3::new(0.0, 0.0, -1.0), &k).is_err());
    }

    #[test]
    fn compose_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(PoseSE3::identity().inverse(), PoseSE3::identity());
        for _ in 0..200 {
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let c = random_pose(&mut rng);
            let ii = a.inverse().inverse();
            assert!((ii.to_homogeneous() - a.to_homogeneous()).amax() < 1e-12);
            let e = a.compose(&a.inverse()).to_homogeneous() - Matrix4::identity();
            assert!(e.amax() < 1e-12);
            let lhs = a.compose(&b).compose(&c).to_homogeneous();
            let rhs = a.compose(&b.compose(&c)).to_homogeneous();
            assert!((lhs - rhs).amax() < 1e-12);
            let prod = a.to_homogeneous() * b.to_homogeneous();
            assert!((a.compose(&b).to_homogeneous() - prod).amax() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_rotation() {
        let r = Mat3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(PoseSE3::new(r, Vec3::zeros()).is_err());
        assert!(PoseSE3::new(Mat3::identity() * 1.001, Vec3::zeros()).is_err());
    }

    #[test]
    fn long_composition_chain_stays_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut acc = PoseSE3::identity();
        for _ in 0..10_000 {
            acc = acc.compose(&random_pose(&mut rng));
            assert!(rotation_deviation(acc.rotation()) < 1e-9);
        }
    }

    #[test]
    fn exp_of_small_twist_matches_first_order() {
        let xi = Vector6::new(1e-9, -2e-9, 3e-9, 1e-9, 1e-9, -1e-9);
        let t = PoseSE3::exp(&xi);
        assert!((t.translation() - Vec3::new(1e-9, 1e-9, -1e-9)).amax() < 1e-17);
        let xi = Vector6::new(0.0, 0.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0);
        let r = PoseSE3::exp(&xi);
        assert!((r.transform(&Vec3::x()) - Vec3::y()).amax() < 1e-15);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 4, 4).is_ok());
        let json = r#"{"fx":500,"fy":500,"cx":320,"cy":240,"width":640,"height":480}"#;
        let k: CameraIntrinsics = serde_json::from_str(json).unwrap();
        assert_eq!(k.fx(), 500.0);
        let bad = r#"{"fx":-1,"fy":500,"cx":320,"cy":240,"width":640,"height":480}"#;
        assert!(serde_json::from_str::<CameraIntrinsics>(bad).is_err());
    }

    #[test]
    fn umeyama_points_exact_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let src: Vec<Vec3> = (0..20)
            .map(|_| Vec3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)))
            .collect();
        let s = Sim3::new(2.5, so3_exp(&Vec3::new(0.3, -0.7, 0.2)), Vec3::new(1.0, -2.0, 0.5)).unwrap();
        let dst: Vec<Vec3> = src.iter().map(|p| s.apply(p)).collect();
        let fit = umeyama_points(&src, &dst).unwrap();
        assert!((fit.scale() - 2.5).abs() < 1e-9);
        assert!((fit.rotation() - s.rotation()).amax() < 1e-9);
        assert!((fit.translation() - s.translation()).amax() < 1e-9);
    }

    #[test]
    fn umeyama_rejects_collinear_and_short() {
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert_eq!(umeyama_points(&line, &line), Err(GeometryError::DegenerateConfiguration));
        let s = Sim3::new(0.5, so3_exp(&Vec3::new(0.1, 0.2, -0.3)), Vec3::new(1.0, 0.0, 2.0)).unwrap();
        let moved: Vec<Vec3> = line.iter().map(|p| s.apply(p)).collect();
        let fit = umeyama_least_squares(&line, &moved).unwrap();
        assert!(line.iter().zip(&moved).all(|(a, b)| (fit.apply(a) - b).norm() < 1e-9));
        let point = vec![Vec3::new(1.0, 1.0, 1.0); 4];
        assert_eq!(umeyama_least_squares(&point, &point), Err(GeometryError::DegenerateConfiguration));
        assert_eq!(umeyama_points(&line[..2], &line[..2]), Err(GeometryError::TooFewPoses(2)));
    }
}
