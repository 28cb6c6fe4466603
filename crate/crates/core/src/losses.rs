//! Depth-training losses with analytic gradients: scale-shift-invariant least
//! squares, virtual normals, and sparse mean squared error.
//!
//! Gradients are dense buffers laid out like the prediction map and taken with
//! respect to linear predicted depth. Pixels that do not enter a loss get 0.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Mat3, Vec3};
use crate::image::{DepthMap, ImageError, SparseDepthMap};

/// Condition number above which the 2x2 normal matrix is treated as singular.
pub const MAX_NORMAL_CONDITION: f64 = 1e12;

/// Relative pairwise-distance floor (times median ground-truth depth) for virtual-normal triplets.
pub const VNL_MIN_EDGE_FRACTION: f64 = 1e-3;

/// Smallest admissible triangle angle for virtual-normal triplets, degrees.
pub const VNL_MIN_ANGLE_DEG: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("need at least {need} jointly valid pixels, found {found}")]
    InsufficientOverlap { need: usize, found: usize },
    #[error("scale/shift normal matrix is singular (condition {condition:e}); is the prediction constant?")]
    SingularNormalMatrix { condition: f64 },
    #[error("every sampled triplet was rejected as degenerate")]
    NoValidTriplets,
    #[error("sparse ground truth is empty")]
    EmptySparseSet,
    #[error("prediction has no valid depth at sparse pixel ({u}, {v})")]
    MissingPrediction { u: u32, v: u32 },
    #[error("mode 2 requires sparse ground truth")]
    MissingSparse,
    #[error("triplet count must be at least 1")]
    ZeroTriplets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl LossResult {
    fn add(mut self, other: &LossResult) -> LossResult {
        self.value += other.value;
        for (g, o) in self.gradient.iter_mut().zip(&other.gradient) {
            *g += o;
        }
        self
    }
}

/// Which training objective [`combined_loss`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Image only: `L_ssi + L_vn`.
    Relative,
    /// Image plus sparse depth: `L_ssi + L_vn + L_mse`.
    SparseGuided,
}

fn joint_valid(pred: &DepthMap, gt: &DepthMap) -> Vec<usize> {
    pred.mask()
        .iter()
        .zip(gt.mask())
        .enumerate()
        .filter_map(|(i, (a, b))| (*a && *b).then_some(i))
        .collect()
}

/// Scale-shift-invariant loss and its closed-form `(s, t)`.
pub fn ssi_loss(pred: &DepthMap, gt: &DepthMap) -> Result<(LossResult, [f64; 2]), LossError> {
    pred.same_dims(gt)?;
    let idx = joint_valid(pred, gt);
    let n = idx.len();
    if n < 2 {
        return Err(LossError::InsufficientOverlap { need: 2, found: n });
    }
    let (mut szz, mut sz, mut szg, mut sg) = (0.0, 0.0, 0.0, 0.0);
    for &i in &idx {
        let z = pred.values()[i];
        let g = gt.values()[i];
        szz += z * z;
        sz += z;
        szg += z * g;
        sg += g;
    }
    let nf = n as f64;
    // Symmetric [[szz, sz], [sz, n]].
    let det = szz * nf - sz * sz;
    let tr = szz + nf;
    let disc = ((tr * tr - 4.0 * det).max(0.0)).sqrt();
    let lmax = 0.5 * (tr + disc);
    let lmin = 0.5 * (tr - disc);
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(det > 0.0) || condition > MAX_NORMAL_CONDITION {
        return Err(LossError::SingularNormalMatrix { condition });
    }
    let s = (nf * szg - sz * sg) / det;
    let t = (szz * sg - sz * szg) / det;

    let mut value = 0.0;
    let mut gradient = vec![0.0; pred.values().len()];
    for &i in &idx {
        let r = s * pred.values()[i] + t - gt.values()[i];
        value += r * r;
        // (s, t) is stationary, so only the direct term survives the chain rule.
        gradient[i] = s * r / nf;
    }
    Ok((LossResult { value: value / (2.0 * nf), gradient }, [s, t]))
}

/// Default triplet budget for a map with `joint_valid` usable pixels.
pub fn default_triplet_count(joint_valid: usize) -> usize {
    5000.min(joint_valid.saturating_mul(10)).max(1)
}

fn skew(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

fn smallest_angle_deg(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let angle = |p: &Vec3, q: &Vec3, r: &Vec3| {
        let u = q - p;
        let v = r - p;
        (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos().to_degrees()
    };
    angle(a, b, c).min(angle(b, c, a)).min(angle(c, a, b))
}

/// Triplets of positions into `m` candidates: all of them when `C(m,3) <= budget`,
/// otherwise `budget` distinct seeded draws. Indices within a triplet are ascending.
fn triplets(m: usize, budget: usize, seed: u64) -> Vec<[usize; 3]> {
    let total = (m as u128) * (m.saturating_sub(1) as u128) * (m.saturating_sub(2) as u128) / 6;
    if total <= budget as u128 {
        let mut out = Vec::with_capacity(total as usize);
        for i in 0..m {
            for j in i + 1..m {
                for k in j + 1..m {
                    out.push([i, j, k]);
                }
            }
        }
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(budget);
    let mut out = Vec::with_capacity(budget);
    let max_attempts = budget.saturating_mul(20);
    let mut attempts = 0;
    while out.len() < budget && attempts < max_attempts {
        attempts += 1;
        let mut t = [rng.random_range(0..m), rng.random_range(0..m), rng.random_range(0..m)];
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            continue;
        }
        t.sort_unstable();
        if seen.insert(t) {
            out.push(t);
        }
    }
    out
}

/// Virtual-normal loss over seeded pixel triplets.
///
/// Triplets are screened on ground-truth geometry: any edge shorter than
/// `1e-3 x median depth` or any angle under 5 degrees rejects the triplet. The value
/// is the mean L1 distance between unit normals of predicted and true planes.
pub fn virtual_normal_loss(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &CameraIntrinsics,
    n_triplets: usize,
    seed: u64,
) -> Result<LossResult, LossError> {
    vnl_eval(pred, gt, k, n_triplets, seed, None)
}

/// Signs of every normal-difference component over the accepted triplets. The loss is
/// smooth between two predictions with equal signatures.
fn vnl_signature(pred: &DepthMap, gt: &DepthMap, k: &CameraIntrinsics, n_triplets: usize, seed: u64) -> Result<Vec<i8>, LossError> {
    let mut signs = Vec::new();
    vnl_eval(pred, gt, k, n_triplets, seed, Some(&mut signs))?;
    Ok(signs)
}

fn vnl_eval(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &CameraIntrinsics,
    n_triplets: usize,
    seed: u64,
    mut signs: Option<&mut Vec<i8>>,
) -> Result<LossResult, LossError> {
    pred.same_dims(gt)?;
    if n_triplets == 0 {
        return Err(LossError::ZeroTriplets);
    }
    let idx = joint_valid(pred, gt);
    if idx.len() < 3 {
        return Err(LossError::InsufficientOverlap { need: 3, found: idx.len() });
    }
    let w = pred.width();
    let rays: Vec<Vec3> = idx.iter().map(|&i| k.ray((i % w) as f64, (i / w) as f64)).collect();
    let p_pred: Vec<Vec3> = idx.iter().zip(&rays).map(|(&i, r)| r * pred.values()[i]).collect();
    let p_gt: Vec<Vec3> = idx.iter().zip(&rays).map(|(&i, r)| r * gt.values()[i]).collect();

    let mut gt_depths: Vec<f64> = idx.iter().map(|&i| gt.values()[i]).collect();
    let mid = gt_depths.len() / 2;
    let median = *gt_depths.select_nth_unstable_by(mid, f64::total_cmp).1;
    let min_edge = VNL_MIN_EDGE_FRACTION * median;

    let mut value = 0.0;
    let mut accepted = 0usize;
    let mut gradient = vec![0.0; pred.values().len()];
    for [a, b, c] in triplets(idx.len(), n_triplets, seed) {
        let (ga, gb, gc) = (&p_gt[a], &p_gt[b], &p_gt[c]);
        if (gb - ga).norm() < min_edge || (gc - gb).norm() < min_edge || (ga - gc).norm() < min_edge {
            continue;
        }
        if smallest_angle_deg(ga, gb, gc) < VNL_MIN_ANGLE_DEG {
            continue;
        }
        let cg = (gb - ga).cross(&(gc - ga));
        let n_gt = cg / cg.norm();

        let (pa, pb, pc) = (&p_pred[a], &p_pred[b], &p_pred[c]);
        let cp = (pb - pa).cross(&(pc - pa));
        let cp_norm = cp.norm();
        accepted += 1;
        if !(cp_norm > 0.0) {
            value += n_gt.abs().sum();
            if let Some(out) = signs.as_deref_mut() {
                out.extend([2, 2, 2]);
            }
            continue;
        }
        let n_pred = cp / cp_norm;
        let diff = n_pred - n_gt;
        value += diff.abs().sum();

        // d|n_pred - n_gt|_1 / dz through n = c/|c| and c = (B-A)x(C-A).
        let sign = diff.map(|d| if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 });
        if let Some(out) = signs.as_deref_mut() {
            out.extend(sign.iter().map(|x| *x as i8));
        }
        let dn_dc = (Mat3::identity() - n_pred * n_pred.transpose()) / cp_norm;
        let g_c = dn_dc.transpose() * sign;
        for (vertex, dc) in [(a, skew(&(pc - pb))), (b, skew(&(pa - pc))), (c, skew(&(pb - pa)))] {
            gradient[idx[vertex]] += g_c.dot(&(dc * rays[vertex]));
        }
    }
    if accepted == 0 {
        return Err(LossError::NoValidTriplets);
    }
    let inv = 1.0 / accepted as f64;
    gradient.iter_mut().for_each(|g| *g *= inv);
    Ok(LossResult { value: value * inv, gradient })
}

/// Mean squared error at sparse ground-truth pixels, halved.
pub fn mse_sparse_loss(pred: &DepthMap, gt_sparse: &SparseDepthMap) -> Result<LossResult, LossError> {
    if gt_sparse.is_empty() {
        return Err(LossError::EmptySparseSet);
    }
    if gt_sparse.width() != pred.width() || gt_sparse.height() != pred.height() {
        return Err(ImageError::DimensionMismatch(pred.width(), pred.height(), gt_sparse.width(), gt_sparse.height()).into());
    }
    let n = gt_sparse.len() as f64;
    let mut value = 0.0;
    let mut gradient = vec![0.0; pred.values().len()];
    for s in gt_sparse.samples() {
        let z = pred.get(s.u as usize, s.v as usize).ok_or(LossError::MissingPrediction { u: s.u, v: s.v })?;
        let r = z - s.z;
        value += r * r;
        gradient[pred.index(s.u as usize, s.v as usize)] += r / n;
    }
    Ok(LossResult { value: value / (2.0 * n), gradient })
}

/// Training objective for one depth mode; the gradient is the sum of the parts.
pub fn combined_loss(
    pred: &DepthMap,
    gt: &DepthMap,
    mode: LossMode,
    gt_sparse: Option<&SparseDepthMap>,
    k: &CameraIntrinsics,
    n_triplets: usize,
    seed: u64,
) -> Result<LossResult, LossError> {
    let (ssi, _) = ssi_loss(pred, gt)?;
    let vn = virtual_normal_loss(pred, gt, k, n_triplets, seed)?;
    let total = ssi.add(&vn);
    match mode {
        LossMode::Relative => Ok(total),
        LossMode::SparseGuided => {
            let sparse = gt_sparse.ok_or(LossError::MissingSparse)?;
            Ok(total.add(&mse_sparse_loss(pred, sparse)?))
        }
    }
}

/// Worst relative error between an analytic gradient and central differences.
#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub loss: &'static str,
    pub probes: usize,
    pub max_rel_error: f64,
}

/// Relative finite-difference step used by [`gradcheck`].
pub const FD_STEP: f64 = 1e-5;

/// Compares analytic gradients of all three losses with central finite differences
/// (step `1e-5 x depth`) at `probes` random pixels of random 16x16 maps. The SSI ground
/// truth is a noisy affine copy of the prediction; unrelated maps drive its scale to zero.
/// VNL probes skip pixels whose stencil straddles a sign change of the L1 term.
pub fn gradcheck(seed: u64, probes: usize) -> Result<Vec<GradcheckReport>, LossError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (16usize, 16usize);
    let k = CameraIntrinsics::new(20.0, 20.0, 8.0, 8.0, w as u32, h as u32).expect("valid intrinsics");
    let mut random_map = |lo: f64, hi: f64| {
        let vals = (0..w * h).map(|_| rng.random_range(lo..hi)).collect();
        DepthMap::from_values(w, h, vals).expect("sized buffer")
    };
    let pred = random_map(1.0, 3.0);
    let noise = random_map(-0.3, 0.3);
    let gt_affine =
        DepthMap::from_values(w, h, pred.values().iter().zip(noise.values()).map(|(z, e)| 1.5 * z + 0.2 + e).collect())
            .expect("sized buffer");
    let gt = random_map(1.0, 3.0);
    let sparse_pts: Vec<(f64, f64, f64)> =
        (0..40).map(|_| (rng.random_range(0..w) as f64, rng.random_range(0..h) as f64, rng.random_range(1.0..3.0))).collect();
    let sparse = SparseDepthMap::from_subpixel(w, h, sparse_pts);
    let probe_pixels: Vec<usize> = (0..probes).map(|_| rng.random_range(0..w * h)).collect();
    let sparse_pixels: Vec<usize> = sparse.samples().iter().map(|s| pred.index(s.u as usize, s.v as usize)).collect();
    let vnl_seed = rng.random::<u64>();
    let n_triplets = default_triplet_count(w * h);

    // Central differences mean nothing across an L1 kink, so VNL probes need a smooth stencil.
    let mut vnl_pixels = Vec::with_capacity(probes);
    let mut attempts = 0;
    while vnl_pixels.len() < probes && attempts < 100 * probes.max(1) {
        attempts += 1;
        let i = rng.random_range(0..w * h);
        let z = pred.values()[i];
        let mut plus = pred.clone();
        plus.set_index(i, z + FD_STEP * z);
        let mut minus = pred.clone();
        minus.set_index(i, z - FD_STEP * z);
        if vnl_signature(&plus, &gt, &k, n_triplets, vnl_seed)? == vnl_signature(&minus, &gt, &k, n_triplets, vnl_seed)? {
            vnl_pixels.push(i);
        }
    }

    type LossFn<'a> = Box<dyn Fn(&DepthMap) -> Result<LossResult, LossError> + 'a>;
    let losses: Vec<(&'static str, LossFn, &[usize])> = vec![
        ("ssi", Box::new(|p: &DepthMap| ssi_loss(p, &gt_affine).map(|r| r.0)), &probe_pixels),
        ("vnl", Box::new(|p: &DepthMap| virtual_normal_loss(p, &gt, &k, n_triplets, vnl_seed)), &vnl_pixels),
        // Away from sparse pixels the mse gradient is identically zero; probe where it is not.
        ("mse", Box::new(|p: &DepthMap| mse_sparse_loss(p, &sparse)), &sparse_pixels),
    ];
    let mut reports = Vec::new();
    for (name, f, pixels) in losses {
        let analytic = f(&pred)?;
        let mut worst: f64 = 0.0;
        for &i in pixels.iter().take(probes) {
            let z = pred.values()[i];
            let step = FD_STEP * z;
            let mut plus = pred.clone();
            plus.set_index(i, z + step);
            let mut minus = pred.clone();
            minus.set_index(i, z - step);
            let fd = (f(&plus)?.value - f(&minus)?.value) / (2.0 * step);
            let a = analytic.gradient[i];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8));
        }
        reports.push(GradcheckReport { loss: name, probes: pixels.len().min(probes), max_rel_error: worst });
    }
    Ok(reports)
}
