use criterion::{criterion_group, criterion_main, Criterion};
use lidarprior::clustering::dbscan;
use lidarprior::ground::{ransac_plane, RansacParams};
use lidarprior::{run_cascade, CascadeParams, OccupancyGrid, OccupancyParams, Point3, Pose, RejectionCascade};
use lidarprior_bench::{blobs, grid_map, mixed_frame};

fn cascade(c: &mut Criterion) {
    let map = grid_map(64);
    let frame = mixed_frame(&map, 100_000, 1);
    let params = CascadeParams::default();
    let cascade = RejectionCascade::from_map(&map, params.ground_margin, params.box_margin).unwrap();
    c.bench_function("run_cascade_100k_64_boxes", |b| {
        b.iter(|| run_cascade(&frame, &Pose::identity(), &map, &cascade, &params).unwrap())
    });
}

fn clustering(c: &mut Criterion) {
    let pts = blobs(20_000, 40, 2);
    c.bench_function("dbscan_20k", |b| b.iter(|| dbscan(&pts, 0.5, 5)));
}

fn ground(c: &mut Criterion) {
    let map = grid_map(16);
    let pts = mixed_frame(&map, 50_000, 3).points;
    let params = RansacParams::default();
    c.bench_function("ransac_50k", |b| b.iter(|| ransac_plane(&pts, &params, 0).unwrap()));
}

fn occupancy(c: &mut Criterion) {
    let map = grid_map(16);
    let mut cloud = mixed_frame(&map, 20_000, 4);
    cloud.points.retain(|p| p.norm() < 40.0);
    let origin = Point3::new(0.0, 0.0, 2.0);
    c.bench_function("occupancy_integrate_scan", |b| {
        b.iter(|| {
            let mut g = OccupancyGrid::new(OccupancyParams::default()).unwrap();
            g.integrate_scan(&origin, &cloud)
        })
    });
}

criterion_group!(benches, cascade, clustering, ground, occupancy);
criterion_main!(benches);
