//! Analytic surfaces, procedural texture and ray casting.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// Ray parameters below this are treated as self-intersections.
const T_EPS: f64 = 1e-9;
const HEIGHT_FIELD_STEPS: usize = 256;
const BISECTION_STEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    /// Plane `p[axis] = offset`, bounded to `[min, max]` in the other two axes (ascending axis order).
    Plane { axis: usize, offset: f64, min: [f64; 2], max: [f64; 2] },
    Sphere { center: [f64; 3], radius: f64 },
    /// `y = base + amplitude * sin(freq_x * x) * cos(freq_z * z)` over `x_range` by `z_range`.
    HeightField { x_range: [f64; 2], z_range: [f64; 2], base: f64, amplitude: f64, freq_x: f64, freq_z: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Ray parameter; equals camera depth when the direction has unit camera z.
    pub t: f64,
    pub point: Vec3,
    pub primitive: usize,
}

fn other_axes(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

impl Primitive {
    fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        match *self {
            Primitive::Plane { axis, offset, min, max } => {
                if d[axis] == 0.0 {
                    return None;
                }
                let t = (offset - o[axis]) / d[axis];
                if t <= T_EPS {
                    return None;
                }
                let (a, b) = other_axes(axis);
                let p = o + d * t;
                (p[a] >= min[0] && p[a] <= max[0] && p[b] >= min[1] && p[b] <= max[1]).then_some(t)
            }
            Primitive::Sphere { center, radius } => {
                let oc = o - Vec3::from(center);
                let a = d.norm_squared();
                let half_b = oc.dot(d);
                let c = oc.norm_squared() - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // Stable root pair.
                let q = -(half_b + half_b.signum() * sq);
                let (mut t0, mut t1) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                if t0 > T_EPS {
                    Some(t0)
                } else if t1 > T_EPS {
                    Some(t1)
                } else {
                    None
                }
            }
            Primitive::HeightField { x_range, z_range, base, amplitude, .. } => {
                let lo = Vec3::new(x_range[0], base - amplitude.abs(), z_range[0]);
                let hi = Vec3::new(x_range[1], base + amplitude.abs(), z_range[1]);
                let (t_in, t_out) = slab(o, d, &lo, &hi)?;
                let t_in = t_in.max(T_EPS);
                if t_out <= t_in {
                    return None;
                }
                let f = |t: f64| {
                    let p = o + d * t;
                    p.y - self.height(p.x, p.z)
                };
                let dt = (t_out - t_in) / HEIGHT_FIELD_STEPS as f64;
                let mut a = t_in;
                let mut fa = f(a);
                if fa == 0.0 {
                    return Some(a);
                }
                for i in 1..=HEIGHT_FIELD_STEPS {
                    let b = if i == HEIGHT_FIELD_STEPS { t_out } else { t_in + dt * i as f64 };
                    let fb = f(b);
                    if fa.signum() != fb.signum() || fb == 0.0 {
                        let (mut lo_t, mut hi_t, f_lo) = (a, b, fa);
                        for _ in 0..BISECTION_STEPS {
                            let mid = 0.5 * (lo_t + hi_t);
                            let fm = f(mid);
                            if fm == 0.0 {
                                return Some(mid);
                            }
                            if fm.signum() == f_lo.signum() {
                                lo_t = mid;
                            } else {
                                hi_t = mid;
                            }
                        }
                        return Some(0.5 * (lo_t + hi_t));
                    }
                    a = b;
                    fa = fb;
                }
                None
            }
        }
    }

    /// Height of a height field; only meaningful for that variant.
    fn height(&self, x: f64, z: f64) -> f64 {
        match *self {
            Primitive::HeightField { base, amplitude, freq_x, freq_z, .. } => {
                base + amplitude * (freq_x * x).sin() * (freq_z * z).cos()
            }
            _ => 0.0,
        }
    }

    /// Unsigned distance-like residual of `p` to the surface, exact for planes and spheres
    /// and a vertical offset for the height field.
    pub fn surface_residual(&self, p: &Vec3) -> f64 {
        match *self {
            Primitive::Plane { axis, offset, .. } => (p[axis] - offset).abs(),
            Primitive::Sphere { center, radius } => ((p - Vec3::from(center)).norm() - radius).abs(),
            Primitive::HeightField { .. } => (p.y - self.height(p.x, p.z)).abs(),
        }
    }

    /// Axis-aligned bounding box corners.
    fn bounds(&self) -> (Vec3, Vec3) {
        match *self {
            Primitive::Plane { axis, offset, min, max } => {
                let (a, b) = other_axes(axis);
                let mut lo = Vec3::zeros();
                let mut hi = Vec3::zeros();
                lo[axis] = offset;
                hi[axis] = offset;
                lo[a] = min[0];
                hi[a] = max[0];
                lo[b] = min[1];
                hi[b] = max[1];
                (lo, hi)
            }
            Primitive::Sphere { center, radius } => {
                let c = Vec3::from(center);
                (c - Vec3::repeat(radius), c + Vec3::repeat(radius))
            }
            Primitive::HeightField { x_range, z_range, base, amplitude, .. } => (
                Vec3::new(x_range[0], base - amplitude.abs(), z_range[0]),
                Vec3::new(x_range[1], base + amplitude.abs(), z_range[1]),
            ),
        }
    }
}

/// Ray/box slab test; returns the entry and exit parameters.
fn slab(o: &Vec3, d: &Vec3, lo: &Vec3, hi: &Vec3) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for i in 0..3 {
        if d[i] == 0.0 {
            if o[i] < lo[i] || o[i] > hi[i] {
                return None;
            }
            continue;
        }
        let a = (lo[i] - o[i]) / d[i];
        let b = (hi[i] - o[i]) / d[i];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t1 >= t0 && t1 > T_EPS).then_some((t0, t1))
}

/// Two octaves of value noise over world position, mapped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Texture {
    pub seed: u64,
    /// Lattice cells per scene unit for the first octave.
    pub frequency: f64,
    /// Half-range of the intensity variation around 0.5.
    pub amplitude: f64,
}

impl Default for Texture {
    fn default() -> Self {
        Texture { seed: 1, frequency: 4.0, amplitude: 0.45 }
    }
}

fn hash3(seed: u64, x: i64, y: i64, z: i64) -> f64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [x, y, z] {
        h ^= v as u64;
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
        h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 29;
    }
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn value_noise(seed: u64, p: &Vec3) -> f64 {
    let cell = p.map(f64::floor);
    let f = p - cell;
    let (ix, iy, iz) = (cell.x as i64, cell.y as i64, cell.z as i64);
    let (wx, wy, wz) = (fade(f.x), fade(f.y), fade(f.z));
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let mut acc = [0.0; 2];
    for (dz, slot) in acc.iter_mut().enumerate() {
        let c = |dx: i64, dy: i64| hash3(seed, ix + dx, iy + dy, iz + dz as i64);
        *slot = lerp(lerp(c(0, 0), c(1, 0), wx), lerp(c(0, 1), c(1, 1), wx), wy);
    }
    lerp(acc[0], acc[1], wz)
}

impl Texture {
    pub fn intensity(&self, p: &Vec3) -> f64 {
        let q = p * self.frequency;
        let n = value_noise(self.seed, &q) + 0.5 * value_noise(self.seed.wrapping_add(1), &(q * 2.0));
        (0.5 + self.amplitude * n / 1.5).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    pub texture: Texture,
}

impl Scene {
    pub fn new(primitives: Vec<Primitive>, texture: Texture) -> Self {
        Scene { primitives, texture }
    }

    /// Nearest intersection along `o + t d`, `t > 0`.
    pub fn cast(&self, o: &Vec3, d: &Vec3) -> Option<Hit> {
        let mut best: Option<(f64, usize)> = None;
        for (i, prim) in self.primitives.iter().enumerate() {
            if let Some(t) = prim.intersect(o, d) {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        best.map(|(t, primitive)| Hit { t, point: o + d * t, primitive })
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        self.primitives.iter().map(Primitive::bounds).reduce(|(la, ha), (lb, hb)| (la.inf(&lb), ha.sup(&hb)))
    }

    pub fn centroid(&self) -> Vec3 {
        self.bounds().map(|(lo, hi)| (lo + hi) * 0.5).unwrap_or_else(Vec3::zeros)
    }

    /// Diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        self.bounds().map(|(lo, hi)| (hi - lo).norm()).unwrap_or(0.0)
    }

    /// Smallest residual of `p` to any primitive.
    pub fn distance_to_surface(&self, p: &Vec3) -> f64 {
        self.primitives.iter().map(|s| s.surface_residual(p)).fold(f64::INFINITY, f64::min)
    }
}

/// Named scene layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenePreset {
    /// Open-ended corridor: floor, two side walls and a few spheres, looking down +z.
    #[default]
    Corridor,
    /// Closed box room with a sphere and a bumpy floor patch.
    Room,
}

impl ScenePreset {
    pub fn build(self, texture: Texture) -> Scene {
        use Primitive::*;
        let prims = match self {
            ScenePreset::Corridor => vec![
                Plane { axis: 1, offset: 1.5, min: [-8.0, -5.0], max: [8.0, 60.0] },
                Plane { axis: 0, offset: -8.0, min: [-6.0, -5.0], max: [1.5, 60.0] },
                Plane { axis: 0, offset: 8.0, min: [-6.0, -5.0], max: [1.5, 60.0] },
                Sphere { center: [-3.0, 0.5, 9.0], radius: 1.0 },
                Sphere { center: [2.5, -0.5, 14.0], radius: 1.5 },
                Sphere { center: [-1.0, 0.8, 20.0], radius: 0.7 },
                Sphere { center: [5.0, 0.0, 25.0], radius: 2.0 },
                Sphere { center: [-5.0, -1.0, 32.0], radius: 2.5 },
                HeightField {
                    x_range: [-3.0, 3.0],
                    z_range: [28.0, 40.0],
                    base: 1.2,
                    amplitude: 0.25,
                    freq_x: 1.3,
                    freq_z: 0.9,
                },
            ],
            ScenePreset::Room => vec![
                Plane { axis: 1, offset: 1.5, min: [-5.0, -2.0], max: [5.0, 12.0] },
                Plane { axis: 1, offset: -3.0, min: [-5.0, -2.0], max: [5.0, 12.0] },
                Plane { axis: 0, offset: -5.0, min: [-3.0, -2.0], max: [1.5, 12.0] },
                Plane { axis: 0, offset: 5.0, min: [-3.0, -2.0], max: [1.5, 12.0] },
                Plane { axis: 2, offset: 12.0, min: [-5.0, -3.0], max: [5.0, 1.5] },
                Plane { axis: 2, offset: -2.0, min: [-5.0, -3.0], max: [5.0, 1.5] },
                Sphere { center: [0.5, 0.2, 6.0], radius: 1.0 },
                HeightField {
                    x_range: [-3.0, 3.0],
                    z_range: [7.0, 11.0],
                    base: 1.3,
                    amplitude: 0.15,
                    freq_x: 2.0,
                    freq_z: 1.5,
                },
            ],
        };
        Scene::new(prims, texture)
    }
}
