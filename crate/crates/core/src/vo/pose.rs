//! Robust pose from 2D-3D correspondences: damped, Huber-reweighted Gauss-Newton
//! on a left-multiplied SE(3) increment.

use nalgebra::{Matrix2x6, Matrix6, Vector2, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{skew, CameraIntrinsics, PoseSE3, Vec3, MIN_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseConfig {
    /// Huber threshold in units of `sigma_px`.
    pub huber_k: f64,
    pub sigma_px: f64,
    pub robust: bool,
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub min_step: f64,
}

impl Default for PoseConfig {
    fn default() -> Self {
        PoseConfig { huber_k: 1.345, sigma_px: 1.0, robust: true, max_iterations: 10, initial_damping: 1e-4, min_step: 1e-8 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("pose needs at least 3 observations, got {0}")]
    InsufficientObservations(usize),
    #[error("cost increased for {0} consecutive damped steps")]
    Diverged(usize),
    #[error("normal equations are singular")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub pose: PoseSE3,
    pub iterations: usize,
    pub cost: f64,
    pub converged: bool,
}

/// A world point and where it was observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub point: Vec3,
    pub u: f64,
    pub v: f64,
}

/// Huber cost of a squared normalized residual and the IRLS weight `min(1, k/|r|)`.
pub fn huber(residual_sq: f64, k: f64) -> (f64, f64) {
    if residual_sq <= k * k {
        (residual_sq, 1.0)
    } else {
        let r = residual_sq.sqrt();
        (2.0 * k * r - k * k, k / r)
    }
}

/// Squared residual charged to points behind the camera.
const BEHIND_PENALTY_SQ: f64 = 1e6;

const CONSECUTIVE_INCREASES: usize = 3;

fn residual(k: &CameraIntrinsics, pc: &Vec3, c: &Correspondence) -> Vector2<f64> {
    Vector2::new(k.fx() * pc.x / pc.z + k.cx() - c.u, k.fy() * pc.y / pc.z + k.cy() - c.v)
}

fn robust_cost(s: f64, cfg: &PoseConfig) -> (f64, f64) {
    if cfg.robust {
        huber(s, cfg.huber_k)
    } else {
        (s, 1.0)
    }
}

pub fn total_cost(pose: &PoseSE3, obs: &[Correspondence], k: &CameraIntrinsics, cfg: &PoseConfig) -> f64 {
    let inv_var = 1.0 / (cfg.sigma_px * cfg.sigma_px);
    obs.iter()
        .map(|c| {
            let pc = pose.transform(&c.point);
            let s = if pc.z > MIN_DEPTH { residual(k, &pc, c).norm_squared() * inv_var } else { BEHIND_PENALTY_SQ };
            robust_cost(s, cfg).0
        })
        .sum()
}

fn normal_equations(
    pose: &PoseSE3,
    obs: &[Correspondence],
    k: &CameraIntrinsics,
    cfg: &PoseConfig,
) -> (Matrix6<f64>, Vector6<f64>) {
    let inv_var = 1.0 / (cfg.sigma_px * cfg.sigma_px);
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for c in obs {
        let pc = pose.transform(&c.point);
        if pc.z <= MIN_DEPTH {
            continue;
        }
        let e = residual(k, &pc, c);
        let w = robust_cost(e.norm_squared() * inv_var, cfg).1 * inv_var;
        let iz = 1.0 / pc.z;
        let dproj = nalgebra::Matrix2x3::new(
            k.fx() * iz,
            0.0,
            -k.fx() * pc.x * iz * iz,
            0.0,
            k.fy() * iz,
            -k.fy() * pc.y * iz * iz,
        );
        let mut j = Matrix2x6::zeros();
        j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(dproj * -skew(&pc)));
        j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
        h += w * j.transpose() * j;
        g += w * j.transpose() * e;
    }
    (h, g)
}

/// Minimizes the robust reprojection cost starting from `init`.
///
/// Damping is Marquardt-scaled (`lambda * diag(H)`), divided by 10 after an accepted
/// step and multiplied by 10 after a rejected one.
pub fn estimate_pose(
    obs: &[Correspondence],
    k: &CameraIntrinsics,
    init: &PoseSE3,
    cfg: &PoseConfig,
) -> Result<PoseEstimate, PoseError> {
    if obs.len() < 3 {
        return Err(PoseError::InsufficientObservations(obs.len()));
    }
    let mut pose = *init;
    let mut cost = total_cost(&pose, obs, k, cfg);
    let mut lambda = cfg.initial_damping;
    let mut increases = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let (h, g) = normal_equations(&pose, obs, k, cfg);
        let mut damped = h;
        for i in 0..6 {
            damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
        }
        let Some(delta) = damped.cholesky().map(|c| -c.solve(&g)) else {
            return Err(PoseError::Degenerate);
        };
        if !delta.iter().all(|d| d.is_finite()) {
            return Err(PoseError::Degenerate);
        }
        let candidate = pose.retract_left(&delta);
        let new_cost = total_cost(&candidate, obs, k, cfg);
        let small = delta.norm() < cfg.min_step;
        if new_cost <= cost {
            pose = candidate;
            cost = new_cost;
            lambda = (lambda * 0.1).max(1e-12);
            increases = 0;
        } else if new_cost <= cost * (1.0 + 1e-12) + 1e-18 {
            // Rounding-level increase: the minimum is reached.
            converged = true;
            break;
        } else {
            lambda *= 10.0;
            increases += 1;
            if increases >= CONSECUTIVE_INCREASES {
                return Err(PoseError::Diverged(increases));
            }
        }
        if small {
            converged = true;
            break;
        }
    }
    Ok(PoseEstimate { pose, iterations, cost, converged })
}
