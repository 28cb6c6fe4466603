use criterion::{criterion_group, criterion_main, Criterion};
use depthvo_core::losses::{mse_sparse_loss, ssi_loss, virtual_normal_loss};
use depthvo_core::{CameraIntrinsics, DepthMap, SparseDepthMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W: usize = 128;
const H: usize = 96;

fn bench(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut map = || DepthMap::from_values(W, H, (0..W * H).map(|_| rng.random_range(1.0..10.0)).collect()).unwrap();
    let (pred, gt) = (map(), map());
    let k = CameraIntrinsics::from_fov(W as u32, H as u32, 70.0).unwrap();
    let sparse = SparseDepthMap::from_subpixel(
        W,
        H,
        (0..500).map(|i| ((i * 7 % W) as f64, (i * 13 % H) as f64, 1.0 + (i % 9) as f64)).collect::<Vec<_>>(),
    );
    let mut g = c.benchmark_group("losses");
    g.bench_function("ssi", |b| b.iter(|| ssi_loss(&pred, &gt).unwrap()));
    g.bench_function("vnl_5000_triplets", |b| b.iter(|| virtual_normal_loss(&pred, &gt, &k, 5000, 3).unwrap()));
    g.bench_function("mse_sparse_500", |b| b.iter(|| mse_sparse_loss(&pred, &sparse).unwrap()));
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
