//! Synthetic inputs shared by the benchmarks.

use lidarprior::boxes::OrientedBox;
use lidarprior::priormap::MapBox;
use lidarprior::{PlaneModel, Point3, PointCloud, PriorMap};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Map with a z = 0 ground plane and `n_boxes` 2 m cubes on a 10 m grid.
pub fn grid_map(n_boxes: usize) -> PriorMap {
    let side = (n_boxes as f64).sqrt().ceil() as usize;
    let volumetric_boxes = (0..n_boxes)
        .map(|i| MapBox {
            source_id: i as u32,
            point_count: 500,
            shape_score: 0.3,
            bbox: OrientedBox::new(
                Point3::new(10.0 * (i % side) as f64 - 40.0, 10.0 * (i / side) as f64 - 40.0, 1.0),
                0.1 * i as f64,
                Vector3::new(1.0, 1.0, 1.0),
            ),
        })
        .collect();
    PriorMap {
        ground_planes: vec![PlaneModel::new(Vector3::z(), 0.0, 0.1).unwrap()],
        volumetric_boxes,
        frame_count: 1,
        ..Default::default()
    }
}

/// `n` points: 60% on the ground, 30% inside the map's boxes, 10% free.
pub fn mixed_frame(map: &PriorMap, n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|i| match i % 10 {
            0..=5 => Point3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-0.05..0.05)),
            6..=8 => {
                let b = &map.volumetric_boxes[rng.random_range(0..map.volumetric_boxes.len())].bbox;
                let (s, c) = b.yaw.sin_cos();
                let (u, v) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                Point3::new(b.center.x + c * u - s * v, b.center.y + s * u + c * v, rng.random_range(0.0..2.0))
            }
            _ => Point3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(0.5..3.0)),
        })
        .collect();
    PointCloud::new(points)
}

/// Gaussian-ish blobs for clustering benchmarks.
pub fn blobs(n: usize, k: usize, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Point3> = (0..k)
        .map(|_| Point3::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), 1.0))
        .collect();
    (0..n)
        .map(|i| {
            let c = centers[i % k];
            c + Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
        .collect()
}
