use depthvo_core::provider::GroundTruthDepth;
use depthvo_core::sim::render::{cast_pixel, render};
use depthvo_core::sim::scene::{Primitive, Scene, ScenePreset, Texture};
use depthvo_core::sim::sequence::{visibility_tolerance, visible_projection};
use depthvo_core::sim::filter_benchmark;
use depthvo_core::sim::{export_sequence, generate_observations, generate_trajectory, SequenceDir, SequenceSpec, TrajectorySpec};
use depthvo_core::{CameraIntrinsics, PoseSE3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn k() -> CameraIntrinsics {
    CameraIntrinsics::new(120.0, 120.0, 63.5, 47.5, 128, 96).unwrap()
}

#[test]
fn plane_depth_in_closed_form() {
    let k = k();
    let scene = Scene::new(
        vec![Primitive::Plane { axis: 2, offset: 5.0, min: [-100.0, -100.0], max: [100.0, 100.0] }],
        Texture::default(),
    );
    let r = render(&scene, &PoseSE3::identity(), &k);
    for y in 0..96 {
        for x in 0..128 {
            let d = Vec3::new((x as f64 - 63.5) / 120.0, (y as f64 - 47.5) / 120.0, 1.0);
            let cos = 1.0 / d.norm();
            assert!((r.depth.get(x, y).unwrap() - 5.0).abs() < 1e-9);
            let hit = cast_pixel(&scene, &PoseSE3::identity(), &k, x as f64, y as f64).unwrap();
            assert!((hit.point.norm() - 5.0 / cos).abs() < 1e-9);
        }
    }
    let away = PoseSE3::from_axis_angle(Vec3::new(0.0, std::f64::consts::PI, 0.0), Vec3::zeros());
    assert_eq!(render(&scene, &away, &k).depth.count_valid(), 0);
}

#[test]
fn sphere_on_axis() {
    let k = k();
    let scene = Scene::new(vec![Primitive::Sphere { center: [0.0, 0.0, 7.0], radius: 1.5 }], Texture::default());
    let pose = PoseSE3::identity();
    let r = render(&scene, &pose, &k);
    let hit = cast_pixel(&scene, &pose, &k, 63.5, 47.5).unwrap();
    assert!((hit.t - 5.5).abs() < 1e-12);
    assert!(r.depth.get(0, 0).is_none());
}

/// Ray march from the camera toward `p` that checks every primitive independently.
fn brute_visible(scene: &Scene, pose: &PoseSE3, k: &CameraIntrinsics, p: &Vec3) -> bool {
    let pc = pose.transform(p);
    if pc.z <= 0.0 {
        return false;
    }
    let (u, v) = (k.fx() * pc.x / pc.z + k.cx(), k.fy() * pc.y / pc.z + k.cy());
    if !k.contains(u, v) {
        return false;
    }
    let o = pose.center();
    let d = (p - o) / pc.z;
    let nearest = scene.primitives.iter().filter_map(|prim| Scene::new(vec![prim.clone()], scene.texture).cast(&o, &d)).map(|h| h.t).fold(f64::INFINITY, f64::min);
    (nearest - pc.z).abs() <= visibility_tolerance(pc.z)
}

#[test]
fn visibility_matches_per_primitive_oracle() {
    let scene = ScenePreset::Corridor.build(Texture::default());
    let k = k();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let poses: Vec<PoseSE3> = (0..10)
        .map(|i| PoseSE3::from_axis_angle(Vec3::new(0.0, rng.random_range(-0.3..0.3), 0.0), Vec3::new(0.0, 0.0, -(i as f64))))
        .collect();
    // Half the landmarks on surfaces, half floating in the corridor.
    let mut landmarks = Vec::new();
    while landmarks.len() < 200 {
        let pose = &poses[rng.random_range(0..poses.len())];
        if landmarks.len() % 2 == 0 {
            if let Some(hit) = cast_pixel(&scene, pose, &k, rng.random_range(0.0..128.0), rng.random_range(0.0..96.0)) {
                landmarks.push(hit.point);
            }
        } else {
            landmarks.push(Vec3::new(rng.random_range(-7.0..7.0), rng.random_range(-4.0..1.4), rng.random_range(0.0..40.0)));
        }
    }
    let mut seen = 0;
    for pose in &poses {
        for p in &landmarks {
            let got = visible_projection(&scene, pose, &k, p).is_some();
            assert_eq!(got, brute_visible(&scene, pose, &k, p));
            seen += got as usize;
        }
    }
    assert!(seen > 200);
}

#[test]
fn landmark_behind_a_wall_is_never_observed() {
    let scene = Scene::new(
        vec![Primitive::Plane { axis: 2, offset: 5.0, min: [-100.0, -100.0], max: [100.0, 100.0] }],
        Texture::default(),
    );
    let k = k();
    for i in 0..20 {
        let pose = PoseSE3::from_axis_angle(Vec3::zeros(), Vec3::new(0.1 * i as f64, 0.0, 0.0));
        assert!(visible_projection(&scene, &pose, &k, &Vec3::new(0.0, 0.0, 8.0)).is_none());
        assert!(visible_projection(&scene, &pose, &k, &Vec3::new(0.0, 0.0, 5.0)).is_some());
    }
}

fn spec(seed: u64) -> SequenceSpec {
    SequenceSpec {
        trajectory: TrajectorySpec::Straight { start: [0.0, 0.0, 0.0], step: [0.05, 0.0, 0.1] },
        n_frames: 6,
        frame_rate: 10.0,
        pixel_noise: 0.0,
        landmark_count: 60,
        landmark_depth_range: [1.5, 40.0],
        outlier_fraction: 0.1,
        outlier_factor_range: [1.5, 3.0],
        seed,
    }
}

#[test]
fn noise_free_observations_are_exact_projections() {
    let scene = ScenePreset::Corridor.build(Texture::default());
    let k = k();
    let spec = spec(4);
    let traj = generate_trajectory(&spec, &scene).unwrap();
    let seq = generate_observations(&scene, &traj, &k, &spec).unwrap();
    assert_eq!(seq.corruption.len(), 6);
    for (frame, (_, pose)) in seq.frames.iter().zip(traj.entries()) {
        for obs in &frame.observations {
            let lm = seq.landmarks.iter().find(|l| l.id == obs.track).unwrap();
            let (u, v, _) = visible_projection(&scene, pose, &k, &Vec3::from(lm.position)).unwrap();
            assert_eq!((obs.u, obs.v), (u, v));
        }
    }
    assert_eq!(seq, generate_observations(&scene, &traj, &k, &spec).unwrap());
}

#[test]
fn export_round_trip() {
    let scene = ScenePreset::Room.build(Texture::default());
    let k = k();
    let spec = SequenceSpec { trajectory: TrajectorySpec::Straight { start: [0.0, -0.5, 0.0], step: [0.05, 0.0, 0.1] }, ..spec(9) };
    let traj = generate_trajectory(&spec, &scene).unwrap();
    let seq = generate_observations(&scene, &traj, &k, &spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_sequence(dir.path(), &scene, &k, &spec, &seq).unwrap();
    let first = std::fs::read(dir.path().join("manifest.json")).unwrap();
    let opened = SequenceDir::open(dir.path()).unwrap();
    assert_eq!(opened.manifest.frames, seq.frames);
    assert_eq!(opened.manifest.landmarks, seq.landmarks);
    assert_eq!(opened.manifest.corruption, seq.corruption);
    assert_eq!(opened.manifest.scene, scene);
    assert!(opened.ground_truth.entries().iter().zip(traj.entries()).all(|((ta, a), (tb, b))| {
        (ta - tb).abs() < 1e-9 && (a.to_homogeneous() - b.to_homogeneous()).amax() < 1e-9
    }));
    let gt = opened.ground_truth_depth();
    for (i, (_, pose)) in traj.entries().iter().enumerate() {
        let r = render(&scene, pose, &k);
        let read = gt.ground_truth(i).unwrap();
        assert_eq!(read.mask(), r.depth.mask());
        assert!(read.values().iter().zip(r.depth.values()).all(|(a, b)| (a - b).abs() <= 1e-6 * b.abs()));
        let img = opened.intensity(i).unwrap();
        assert!(img.data().iter().zip(r.intensity.data()).all(|(a, b)| (a - b).abs() <= 1e-5 || (*b < 0.0 && *a < 0.0)));
    }
    let again = tempfile::tempdir().unwrap();
    export_sequence(again.path(), &scene, &k, &spec, &seq).unwrap();
    assert_eq!(first, std::fs::read(again.path().join("manifest.json")).unwrap());
}

#[test]
fn observations_never_straddle_a_silhouette() {
    let mut b = filter_benchmark(0);
    b.sequence.n_frames = 8;
    b.sequence.pixel_noise = 0.0;
    let traj = generate_trajectory(&b.sequence, &b.scene).unwrap();
    let seq = generate_observations(&b.scene, &traj, &b.intrinsics, &b.sequence).unwrap();
    let (w, h) = (b.intrinsics.width() as usize, b.intrinsics.height() as usize);
    for (frame, (_, pose)) in seq.frames.iter().zip(traj.entries()) {
        let r = render(&b.scene, pose, &b.intrinsics);
        assert!(!frame.observations.is_empty());
        for obs in &frame.observations {
            let (x0, y0) = (obs.u.floor() as usize, obs.v.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let prims: Vec<_> = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)].iter().map(|(x, y)| r.primitive[y * w + x]).collect();
            assert!(prims.iter().all(|p| *p == prims[0]), "frame {} track {:?}", frame.id, obs.track);
        }
    }
}
