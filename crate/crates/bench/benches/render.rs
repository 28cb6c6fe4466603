use criterion::{criterion_group, criterion_main, Criterion};
use depthvo_core::sim::filter_benchmark;
use depthvo_core::sim::render::render;
use depthvo_core::sim::generate_trajectory;

fn bench(c: &mut Criterion) {
    let b = filter_benchmark(0);
    let traj = generate_trajectory(&b.sequence, &b.scene).unwrap();
    let pose = traj.entries()[0].1;
    c.bench_function("render_corridor_640x480", |bench| bench.iter(|| render(&b.scene, &pose, &b.intrinsics)));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench
}
criterion_main!(benches);
