//! Parallel vs sequential kernel benchmarks. Every data-parallel kernel has a
//! sequential twin with bitwise-identical output; these benches compare the
//! two on the workloads that dominate training, fitting, and evaluation.
//!
//! Run with the default features for the rayon-backed kernels, or with
//! `--no-default-features` to measure the sequential dispatch everywhere.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use latsurf::diffcore::tensor::{matmul, matmul_seq, Tensor};
use latsurf::geometry::{icosphere, intersect, Vec3};
use latsurf::losses::{nearest_all, nearest_all_seq, KdTree};
use latsurf::rng::rng_from_seed;
use latsurf::volume::{
    sobel_gradient, sobel_gradient_seq, unsigned_distance_transform, voxelize, voxelize_seq,
    VoxelGrid,
};
use rand::Rng;

fn bench_matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    let mut rng = rng_from_seed(1);
    // The decoder's dominant layer at fitting resolution: V x 724 by 724 x 724.
    for &rows in &[162usize, 642] {
        let a = Tensor::fan_in_uniform(rows, 724, 724, &mut rng);
        let b = Tensor::fan_in_uniform(724, 724, 724, &mut rng);
        group.bench_with_input(BenchmarkId::new("parallel", rows), &rows, |bench, _| {
            bench.iter(|| matmul(black_box(&a), black_box(&b)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", rows), &rows, |bench, _| {
            bench.iter(|| matmul_seq(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn bench_nearest_neighbors(c: &mut Criterion) {
    let mut group = c.benchmark_group("chamfer_nn");
    let mut rng = rng_from_seed(2);
    let targets: Vec<Vec3> = (0..2500)
        .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let queries: Vec<Vec3> = (0..2500)
        .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let tree = KdTree::build(&targets);
    group.bench_function("parallel", |bench| {
        bench.iter(|| nearest_all(black_box(&tree), black_box(&queries)))
    });
    group.bench_function("sequential", |bench| {
        bench.iter(|| nearest_all_seq(black_box(&tree), black_box(&queries)))
    });
    group.finish();
}

fn bench_distance_transform(c: &mut Criterion) {
    let mut group = c.benchmark_group("distance_transform");
    group.sample_size(20);
    let mut rng = rng_from_seed(3);
    let mut mask = VoxelGrid::zeros([48, 48, 48], [1.0; 3], Vec3::default()).unwrap();
    for v in mask.values.iter_mut() {
        *v = if rng.gen::<f64>() < 0.3 { 1.0 } else { 0.0 };
    }
    group.bench_function("udt_48cube", |bench| {
        bench.iter(|| unsigned_distance_transform(black_box(&mask)).unwrap())
    });
    group.finish();
}

fn bench_voxelize(c: &mut Criterion) {
    let mut group = c.benchmark_group("voxelize");
    group.sample_size(20);
    let mesh = icosphere(3).unwrap();
    let dims = [32, 32, 32];
    let spacing = [2.4 / 32.0; 3];
    let origin = Vec3::new(-1.2, -1.2, -1.2);
    group.bench_function("parallel", |bench| {
        bench.iter(|| voxelize(black_box(&mesh), dims, spacing, origin).unwrap())
    });
    group.bench_function("sequential", |bench| {
        bench.iter(|| voxelize_seq(black_box(&mesh), dims, spacing, origin).unwrap())
    });
    group.finish();
}

fn bench_sobel(c: &mut Criterion) {
    let mut group = c.benchmark_group("sobel");
    group.sample_size(20);
    let mut rng = rng_from_seed(4);
    let mut grid = VoxelGrid::zeros([48, 48, 48], [1.0; 3], Vec3::default()).unwrap();
    for v in grid.values.iter_mut() {
        *v = rng.gen();
    }
    group.bench_function("parallel", |bench| {
        bench.iter(|| sobel_gradient(black_box(&grid)).unwrap())
    });
    group.bench_function("sequential", |bench| {
        bench.iter(|| sobel_gradient_seq(black_box(&grid)).unwrap())
    });
    group.finish();
}

fn bench_self_intersection(c: &mut Criterion) {
    let mut group = c.benchmark_group("self_intersection");
    group.sample_size(20);
    let a = icosphere(3).unwrap();
    let b = icosphere(3).unwrap().translated(Vec3::new(0.6, 0.1, 0.0));
    let offset = a.vertices.len();
    let mut vertices = a.vertices.clone();
    vertices.extend_from_slice(&b.vertices);
    let mut faces = a.faces.clone();
    faces.extend(b.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
    let mesh = latsurf::geometry::TriMesh { vertices, faces };
    group.bench_function("parallel", |bench| {
        bench.iter(|| intersect::self_intersecting_faces(black_box(&mesh)))
    });
    group.bench_function("sequential", |bench| {
        bench.iter(|| intersect::self_intersecting_faces_seq(black_box(&mesh)))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_matmul,
    bench_nearest_neighbors,
    bench_distance_transform,
    bench_voxelize,
    bench_sobel,
    bench_self_intersection
);
criterion_main!(benches);
