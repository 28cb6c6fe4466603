use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use depthvo_core::nearfar::{evaluate, rank_displacement, ProjectedPoint, SigmaPolicy};
use depthvo_core::MapPointId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn points(n: usize) -> Vec<ProjectedPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    (0..n)
        .map(|i| {
            let z = rng.random_range(1.0..40.0);
            ProjectedPoint { map_point_id: MapPointId(i as u64), u: 0.0, v: 0.0, z_vo: z, z_pred: 1.7 * z * rng.random_range(0.95..1.05) + 0.3 }
        })
        .collect()
}

fn bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("rank_displacement");
    for n in [100, 500, 2000] {
        let pts = points(n);
        g.bench_with_input(BenchmarkId::new("lambdas", n), &pts, |b, p| b.iter(|| rank_displacement(p).unwrap()));
        g.bench_with_input(BenchmarkId::new("evaluate_adaptive", n), &pts, |b, p| b.iter(|| evaluate(p, SigmaPolicy::Adaptive).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
