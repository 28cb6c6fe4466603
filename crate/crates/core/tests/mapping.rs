use depthvo_core::geometry::{project_transferred, transfer_point, unproject};
use depthvo_core::mapping::{consistency_check, fuse_keyframe, MappingFrame, PassMask};
use depthvo_core::sim::render::{cast_pixel, render, Rendered};
use depthvo_core::sim::scene::{Scene, ScenePreset, Texture};
use depthvo_core::{CameraIntrinsics, PixelPoint, PointCloud, PoseSE3, Vec3};
use nalgebra::{Rotation3, Vector3};

const DELTA: f64 = 0.05;
const GAMMA: f64 = 0.05;

struct Pair {
    scene: Scene,
    k: CameraIntrinsics,
    pose1: PoseSE3,
    pose2: PoseSE3,
    kf1: Rendered,
    kf2: Rendered,
}

/// Camera at `center` pitched down by `pitch` and turned by `yaw`.
fn camera(center: Vec3, pitch: f64, yaw: f64) -> PoseSE3 {
    let r_wc = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw) * Rotation3::from_axis_angle(&Vector3::x_axis(), -pitch);
    PoseSE3::from_center(r_wc.into_inner(), center).unwrap()
}

/// Two views of the room from above, steep enough that the bumpy floor never hides
/// part of itself. The texture is coarse enough for bilinear sampling to follow it.
fn pair() -> Pair {
    let scene = ScenePreset::Room.build(Texture { frequency: 1.0, ..Texture::default() });
    let k = CameraIntrinsics::from_fov(320, 240, 70.0).unwrap();
    let pose1 = camera(Vec3::new(0.3, -2.4, 3.5), 0.5, 0.08);
    let pose2 = camera(Vec3::new(-0.2, -2.3, 4.0), 0.55, -0.05);
    let kf1 = render(&scene, &pose1, &k);
    let kf2 = render(&scene, &pose2, &k);
    Pair { scene, k, pose1, pose2, kf1, kf2 }
}

/// Pixels of keyframe 2 whose surface point keyframe 1 sees unoccluded, with all four
/// bilinear support pixels on the same primitive.
fn mutually_visible(p: &Pair) -> Vec<(usize, usize)> {
    let (w, h) = (p.k.width() as usize, p.k.height() as usize);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let Some(z2) = p.kf2.depth.get(x, y) else { continue };
            let prim = p.kf2.primitive[y * w + x];
            let pc = unproject(&p.k, &PixelPoint::with_depth(x as f64, y as f64, z2)).unwrap();
            let p1 = transfer_point(&p.pose2, &p.pose1, &pc);
            let Ok((u, v)) = project_transferred(&p1, &p.k) else { continue };
            if !p.k.contains(u, v) || u.floor() as usize + 1 >= w || v.floor() as usize + 1 >= h {
                continue;
            }
            let (x0, y0) = (u.floor() as usize, v.floor() as usize);
            let support = [(x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1)];
            if support.iter().any(|(sx, sy)| p.kf1.primitive[sy * w + sx] != prim) {
                continue;
            }
            let Some(hit) = cast_pixel(&p.scene, &p.pose1, &p.k, u, v) else { continue };
            if (hit.t - p1.z).abs() > 1e-6 * p1.z {
                continue;
            }
            out.push((x, y));
        }
    }
    out
}

fn check(p: &Pair, depth2: &depthvo_core::DepthMap) -> PassMask {
    let f2 = MappingFrame { pose: &p.pose2, depth: depth2, image: &p.kf2.intensity };
    let f1 = MappingFrame { pose: &p.pose1, depth: &p.kf1.depth, image: &p.kf1.intensity };
    consistency_check(&f2, &f1, &p.k, DELTA, GAMMA).unwrap()
}

#[test]
fn every_mutually_visible_pixel_passes() {
    let p = pair();
    let visible = mutually_visible(&p);
    assert!(visible.len() > 30_000, "{}", visible.len());
    let mask = check(&p, &p.kf2.depth);
    let failed: Vec<_> = visible.iter().filter(|(x, y)| !mask.get(*x, *y)).collect();
    assert!(failed.is_empty(), "{} of {} failed, first {:?}", failed.len(), visible.len(), failed.first());
}

#[test]
fn corrupted_block_never_passes() {
    let p = pair();
    let mut depth = p.kf2.depth.clone();
    let block: Vec<(usize, usize)> = (100..140).flat_map(|y| (140..200).map(move |x| (x, y))).collect();
    for &(x, y) in &block {
        let z = depth.get(x, y).unwrap();
        depth.set(x, y, z + 10.0 * DELTA);
    }
    let mask = check(&p, &depth);
    assert_eq!(block.iter().filter(|(x, y)| mask.get(*x, *y)).count(), 0);
    let clean = check(&p, &p.kf2.depth);
    assert!(block.iter().filter(|(x, y)| clean.get(*x, *y)).count() > block.len() / 2);
}

#[test]
fn fused_points_lie_on_surfaces() {
    let p = pair();
    let mask = check(&p, &p.kf2.depth);
    let mut cloud = PointCloud::new(true);
    let n = fuse_keyframe(&mut cloud, &p.pose2, &p.kf2.depth, &mask, &p.k, Some(&p.kf2.intensity), 0.0).unwrap();
    assert_eq!(n, mask.count());
    let tol = 1e-6 * p.scene.diameter();
    let worst = cloud.points().iter().map(|q| p.scene.distance_to_surface(q)).fold(0.0, f64::max);
    assert!(worst < tol, "{worst}");

    let mut coarse = PointCloud::new(false);
    let kept = fuse_keyframe(&mut coarse, &p.pose2, &p.kf2.depth, &mask, &p.k, None, 0.25).unwrap();
    assert!(kept > 0 && kept < n);
    let mut keys: Vec<[i64; 3]> =
        coarse.points().iter().map(|q| [(q.x / 0.25).floor() as i64, (q.y / 0.25).floor() as i64, (q.z / 0.25).floor() as i64]).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), kept);
}

#[test]
fn threshold_domain() {
    let p = pair();
    let f2 = MappingFrame { pose: &p.pose2, depth: &p.kf2.depth, image: &p.kf2.intensity };
    let f1 = MappingFrame { pose: &p.pose1, depth: &p.kf1.depth, image: &p.kf1.intensity };
    assert!(consistency_check(&f2, &f1, &p.k, -0.1, GAMMA).is_err());
    assert!(consistency_check(&f2, &f1, &p.k, DELTA, f64::NAN).is_err());
    assert_eq!(consistency_check(&f2, &f1, &p.k, 0.0, GAMMA).unwrap().count(), 0);
}

