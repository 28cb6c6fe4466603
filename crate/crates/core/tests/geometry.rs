use depthvo_core::geometry::{project, project_transferred, transfer_point, umeyama_points, unproject};
use depthvo_core::metrics::ate_rmse;
use depthvo_core::{CameraIntrinsics, PixelPoint, PoseSE3, Sim3, Trajectory, Vec3};
use nalgebra::{Matrix4, Vector4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn k() -> CameraIntrinsics {
    CameraIntrinsics::new(525.0, 520.0, 319.5, 239.5, 640, 480).unwrap()
}

fn random_pose(rng: &mut impl Rng) -> PoseSE3 {
    let w = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let t = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    PoseSE3::from_axis_angle(w, t)
}

fn random_sim3(rng: &mut impl Rng) -> Sim3 {
    let p = random_pose(rng);
    Sim3::new(rng.random_range(0.05..20.0), *p.rotation(), *p.translation()).unwrap()
}

fn random_trajectory(rng: &mut impl Rng, n: usize) -> Trajectory {
    let mut c = Vec3::zeros();
    let entries = (0..n)
        .map(|i| {
            c += Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.1..0.1), rng.random_range(0.0..0.4));
            let r = PoseSE3::from_axis_angle(Vec3::new(0.0, rng.random_range(-0.5..0.5), 0.0), Vec3::zeros());
            (i as f64 * 0.1, PoseSE3::from_center(r.rotation().transpose(), c).unwrap())
        })
        .collect();
    Trajectory::from_entries(entries).unwrap()
}

#[test]
fn projection_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let k = k();
    for _ in 0..10_000 {
        let pose = random_pose(&mut rng);
        let px = PixelPoint::with_depth(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0), rng.random_range(0.1..100.0));
        let pc = unproject(&k, &px).unwrap();
        let pw = pose.inverse().transform(&pc);
        let back = project(&k, &pose, &pw).unwrap();
        let z = px.z.unwrap();
        assert!((back.u - px.u).abs() <= 1e-9 * px.u.abs().max(1.0));
        assert!((back.v - px.v).abs() <= 1e-9 * px.v.abs().max(1.0));
        assert!((back.z.unwrap() - z).abs() <= 1e-9 * z);
    }
}

#[test]
fn transport_chain_matches_direct_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let k = k();
    for _ in 0..2000 {
        let (p2, p1) = (random_pose(&mut rng), random_pose(&mut rng));
        let x = Vec3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
        let in1 = p1.transform(&x);
        if in1.z < 0.5 {
            continue;
        }
        let chained = transfer_point(&p2, &p1, &p2.transform(&x));
        assert!((chained - in1).norm() <= 1e-9 * in1.norm().max(1.0));
        let (u, v) = project_transferred(&chained, &k).unwrap();
        let direct = project(&k, &p1, &x).unwrap();
        assert!((u - direct.u).abs() <= 1e-9 * direct.u.abs().max(1.0));
        assert!((v - direct.v).abs() <= 1e-9 * direct.v.abs().max(1.0));
    }
}

#[test]
fn composition_matches_homogeneous_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let (a, b) = (random_pose(&mut rng), random_pose(&mut rng));
        let m: Matrix4<f64> = a.to_homogeneous() * b.to_homogeneous();
        assert!((a.compose(&b).to_homogeneous() - m).amax() < 1e-12);
        let x = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let h = m * Vector4::new(x.x, x.y, x.z, 1.0);
        assert!((a.compose(&b).transform(&x) - h.xyz()).norm() < 1e-12);
        assert!((a.compose(&a.inverse()).to_homogeneous() - Matrix4::identity()).amax() < 1e-12);
    }
}

#[test]
fn umeyama_recovers_exact_similarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let sim = random_sim3(&mut rng);
        let src: Vec<Vec3> = (0..30)
            .map(|_| Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
            .collect();
        let dst: Vec<Vec3> = src.iter().map(|p| sim.apply(p)).collect();
        let est = umeyama_points(&src, &dst).unwrap();
        assert!((est.scale() - sim.scale()).abs() < 1e-9 * sim.scale());
        assert!((est.rotation() - sim.rotation()).amax() < 1e-9);
        for (s, d) in src.iter().zip(&dst) {
            assert!((est.apply(s) - d).norm() < 1e-8 * d.norm().max(1.0));
        }
    }
}

#[test]
fn noisy_alignment_beats_random_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sim = random_sim3(&mut rng);
    let src: Vec<Vec3> = (0..40)
        .map(|_| Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
        .collect();
    let dst: Vec<Vec3> = src
        .iter()
        .map(|p| sim.apply(p) + Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
        .collect();
    let residual = |s: &Sim3| src.iter().zip(&dst).map(|(a, b)| (s.apply(a) - b).norm_squared()).sum::<f64>();
    let best = residual(&umeyama_points(&src, &dst).unwrap());
    for _ in 0..1000 {
        let candidate = random_sim3(&mut rng);
        assert!(best <= residual(&candidate));
    }
}

#[test]
fn ate_is_zero_for_sim3_copies() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let gt = random_trajectory(&mut rng, 60);
        let est = gt.transformed(&random_sim3(&mut rng));
        assert!(ate_rmse(&est, &gt, true).unwrap() < 1e-9);
    }
}

proptest! {
    #[test]
    fn ate_alignment_ignores_similarity(seed in any::<u64>(), n in 3usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = random_trajectory(&mut rng, n);
        let est = gt.transformed(&random_sim3(&mut rng));
        let noisy_entries: Vec<(f64, PoseSE3)> = est
            .entries()
            .iter()
            .map(|(t, p)| {
                let c = p.center() + Vec3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
                (*t, PoseSE3::from_center(p.rotation().transpose(), c).unwrap())
            })
            .collect();
        let noisy = Trajectory::from_entries(noisy_entries).unwrap();
        let base = ate_rmse(&noisy, &gt, true).unwrap();
        let moved = ate_rmse(&noisy.transformed(&random_sim3(&mut rng)), &gt, true).unwrap();
        prop_assert!((base - moved).abs() < 1e-9);
    }

    #[test]
    fn pose_inverse_round_trip(wx in -3.0f64..3.0, wy in -3.0f64..3.0, wz in -3.0f64..3.0, tx in -9.0f64..9.0) {
        let p = PoseSE3::from_axis_angle(Vec3::new(wx, wy, wz), Vec3::new(tx, -tx, 0.5 * tx));
        let x = Vec3::new(1.0, -2.0, 3.0);
        prop_assert!((p.inverse().transform(&p.transform(&x)) - x).norm() < 1e-12);
    }
}
