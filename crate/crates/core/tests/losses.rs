use depthvo_core::losses::{combined_loss, gradcheck, mse_sparse_loss, ssi_loss, virtual_normal_loss, LossError, LossMode, LossResult};
use depthvo_core::{CameraIntrinsics, DepthMap, SparseDepthMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W: usize = 20;
const H: usize = 15;

fn k() -> CameraIntrinsics {
    CameraIntrinsics::new(25.0, 25.0, 10.0, 7.5, W as u32, H as u32).unwrap()
}

fn random_map(rng: &mut ChaCha8Rng) -> DepthMap {
    DepthMap::from_values(W, H, (0..W * H).map(|_| rng.random_range(1.0..4.0)).collect()).unwrap()
}

/// Central differences against the analytic gradient at `pixels`.
fn fd_worst(pred: &DepthMap, pixels: &[usize], f: impl Fn(&DepthMap) -> LossResult) -> f64 {
    let analytic = f(pred);
    let mut worst: f64 = 0.0;
    for &i in pixels {
        let z = pred.values()[i];
        let h = 1e-5 * z;
        let mut p = pred.clone();
        p.set_index(i, z + h);
        let up = f(&p).value;
        p.set_index(i, z - h);
        let down = f(&p).value;
        let fd = (up - down) / (2.0 * h);
        let a = analytic.gradient[i];
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8));
    }
    worst
}

#[test]
fn ssi_is_zero_on_affine_copies() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let gt = random_map(&mut rng);
        let (s, t) = (rng.random_range(0.1..10.0), rng.random_range(-0.5..2.0));
        let pred = DepthMap::from_values(W, H, gt.values().iter().map(|g| (g - t) / s).collect()).unwrap();
        let (r, [s_hat, t_hat]) = ssi_loss(&pred, &gt).unwrap();
        assert!(r.value < 1e-10);
        assert!((s_hat - s).abs() < 1e-8 * s && (t_hat - t).abs() < 1e-8);
    }
}

#[test]
fn ssi_gradient_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (pred, gt) = (random_map(&mut rng), random_map(&mut rng));
    let pixels: Vec<usize> = (0..100).map(|_| rng.random_range(0..W * H)).collect();
    assert!(fd_worst(&pred, &pixels, |p| ssi_loss(p, &gt).unwrap().0) < 1e-4);
}

#[test]
fn vnl_gradient_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (pred, gt) = (random_map(&mut rng), random_map(&mut rng));
    let k = k();
    let pixels: Vec<usize> = (0..100).map(|_| rng.random_range(0..W * H)).collect();
    assert!(fd_worst(&pred, &pixels, |p| virtual_normal_loss(p, &gt, &k, 2000, 9).unwrap()) < 1e-4);
}

#[test]
fn mse_gradient_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pred = random_map(&mut rng);
    let pts: Vec<(f64, f64, f64)> =
        (0..100).map(|_| (rng.random_range(0..W) as f64, rng.random_range(0..H) as f64, rng.random_range(1.0..4.0))).collect();
    let sparse = SparseDepthMap::from_subpixel(W, H, pts);
    let pixels: Vec<usize> = sparse.samples().iter().map(|s| pred.index(s.u as usize, s.v as usize)).collect();
    assert!(fd_worst(&pred, &pixels, |p| mse_sparse_loss(p, &sparse).unwrap()) < 1e-4);
    let naive: f64 = sparse
        .samples()
        .iter()
        .map(|s| (pred.get(s.u as usize, s.v as usize).unwrap() - s.z).powi(2))
        .sum::<f64>()
        / (2.0 * sparse.len() as f64);
    assert!((mse_sparse_loss(&pred, &sparse).unwrap().value - naive).abs() < 1e-12);
}

#[test]
fn builtin_gradcheck_passes() {
    for seed in 0..5 {
        for r in gradcheck(seed, 100).unwrap() {
            assert!(r.max_rel_error < 1e-4, "{} {}", r.loss, r.max_rel_error);
        }
    }
}

#[test]
fn vnl_is_scale_invariant_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let k = k();
    for i in 0..100 {
        let (pred, gt) = (random_map(&mut rng), random_map(&mut rng));
        let c = rng.random_range(0.01..100.0);
        let a = virtual_normal_loss(&pred, &gt, &k, 500, i).unwrap().value;
        let b = virtual_normal_loss(&pred.scaled(c), &gt, &k, 500, i).unwrap().value;
        assert!((a - b).abs() < 1e-9);
        assert!((0.0..=2.0 * 3f64.sqrt()).contains(&a));
        assert!(virtual_normal_loss(&gt, &gt, &k, 500, i).unwrap().value < 1e-12);
    }
}

#[test]
fn combined_loss_sums_parts() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (pred, gt) = (random_map(&mut rng), random_map(&mut rng));
    let sparse = SparseDepthMap::from_subpixel(W, H, [(3.0, 4.0, 2.0), (10.0, 11.0, 3.0)]);
    let k = k();
    let parts = ssi_loss(&pred, &gt).unwrap().0.value
        + virtual_normal_loss(&pred, &gt, &k, 300, 1).unwrap().value
        + mse_sparse_loss(&pred, &sparse).unwrap().value;
    let total = combined_loss(&pred, &gt, LossMode::SparseGuided, Some(&sparse), &k, 300, 1).unwrap();
    assert!((total.value - parts).abs() < 1e-12);
    assert!(matches!(
        combined_loss(&pred, &gt, LossMode::SparseGuided, None, &k, 300, 1),
        Err(LossError::MissingSparse)
    ));
}

#[test]
fn degenerate_inputs_are_rejected() {
    let flat = DepthMap::from_values(W, H, vec![2.0; W * H]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gt = random_map(&mut rng);
    assert!(matches!(ssi_loss(&flat, &gt), Err(LossError::SingularNormalMatrix { .. })));
    assert!(matches!(ssi_loss(&DepthMap::new_invalid(W, H), &gt), Err(LossError::InsufficientOverlap { .. })));
    assert!(matches!(virtual_normal_loss(&gt, &gt, &k(), 0, 0), Err(LossError::ZeroTriplets)));
    assert!(matches!(mse_sparse_loss(&gt, &SparseDepthMap::from_subpixel(W, H, [])), Err(LossError::EmptySparseSet)));
}

proptest! {
    #[test]
    fn ssi_ignores_affine_changes_of_prediction(seed in any::<u64>(), s in 0.1f64..10.0, t in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = (random_map(&mut rng), random_map(&mut rng));
        let moved = DepthMap::from_values(W, H, pred.values().iter().map(|z| s * z + t).collect()).unwrap();
        let a = ssi_loss(&pred, &gt).unwrap().0.value;
        let b = ssi_loss(&moved, &gt).unwrap().0.value;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-9));
    }
}
