//! Ray-cast depth and intensity images.

use rayon::prelude::*;

use super::scene::{Hit, Scene};
use crate::geometry::{CameraIntrinsics, PoseSE3, Vec3};
use crate::image::{DepthMap, GrayImage, INVALID_INTENSITY};

/// Depth, intensity and the primitive hit at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub depth: DepthMap,
    pub intensity: GrayImage,
    pub primitive: Vec<Option<usize>>,
}

/// World-frame ray through `(u, v)` with unit camera-z, so the hit parameter is the depth.
pub fn pixel_ray(pose: &PoseSE3, k: &CameraIntrinsics, u: f64, v: f64) -> (Vec3, Vec3) {
    let d_c = k.ray(u, v);
    (pose.center(), pose.rotation().transpose() * d_c)
}

pub fn cast_pixel(scene: &Scene, pose: &PoseSE3, k: &CameraIntrinsics, u: f64, v: f64) -> Option<Hit> {
    let (o, d) = pixel_ray(pose, k, u, v);
    scene.cast(&o, &d)
}

pub fn render(scene: &Scene, pose: &PoseSE3, k: &CameraIntrinsics) -> Rendered {
    let (w, h) = (k.width() as usize, k.height() as usize);
    let rows: Vec<Vec<Option<Hit>>> = (0..h)
        .into_par_iter()
        .map(|y| (0..w).map(|x| cast_pixel(scene, pose, k, x as f64, y as f64)).collect())
        .collect();
    let hits: Vec<Option<Hit>> = rows.concat();
    let values = hits.iter().map(|hit| hit.map_or(0.0, |hit| hit.t)).collect();
    let mask = hits.iter().map(Option::is_some).collect();
    let depth = DepthMap::from_values_and_mask(w, h, values, mask).expect("sizes match intrinsics");
    let data = hits.iter().map(|hit| hit.map_or(INVALID_INTENSITY, |hit| scene.texture.intensity(&hit.point))).collect();
    let intensity = GrayImage::from_data(w, h, data).expect("sizes match intrinsics");
    Rendered { depth, intensity, primitive: hits.iter().map(|hit| hit.map(|hit| hit.primitive)).collect() }
}

pub fn render_depth(scene: &Scene, pose: &PoseSE3, k: &CameraIntrinsics) -> DepthMap {
    render(scene, pose, k).depth
}

pub fn render_intensity(scene: &Scene, pose: &PoseSE3, k: &CameraIntrinsics) -> GrayImage {
    render(scene, pose, k).intensity
}
