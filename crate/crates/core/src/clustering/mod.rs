//! Per-frame density clustering, centroid super-clustering for identities
//! that hold across frames, and structure-tensor shape features.

mod dbscan;
mod features;

pub use dbscan::{cluster_count, core_points, dbscan, median_neighbor_distance, ClusterLabel};
pub use features::{
    classify_cluster, cluster_features, mean_point_planarity, planarity, structure_tensor, ClusterFeatures,
    PlanarityMode, ShapeClass,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringParams {
    pub eps: f64,
    pub min_pts: usize,
    /// When set, a frame's eps becomes `max(eps, factor * median nearest
    /// neighbour distance)` to follow the scan's density.
    pub adaptive_eps_factor: Option<f64>,
    /// Super-clustering radius over per-frame centroids.
    pub eps2: f64,
    pub min_pts2: usize,
    pub planarity_threshold: f64,
    pub planarity_mode: PlanarityMode,
    /// Clusters with fewer points are discarded as clutter.
    pub min_cluster_points: usize,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        ClusteringParams {
            eps: 0.7,
            min_pts: 5,
            adaptive_eps_factor: None,
            eps2: 1.0,
            min_pts2: 1,
            planarity_threshold: 0.6,
            planarity_mode: PlanarityMode::default(),
            min_cluster_points: 10,
        }
    }
}

impl ClusteringParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::config("clustering.eps", "must be positive"));
        }
        if self.min_pts == 0 {
            return Err(Error::config("clustering.min_pts", "must be at least 1"));
        }
        if let Some(f) = self.adaptive_eps_factor {
            if !(f > 0.0) {
                return Err(Error::config("clustering.adaptive_eps_factor", "must be positive"));
            }
        }
        if !(self.eps2 > 0.0) {
            return Err(Error::config("clustering.eps2", "must be positive"));
        }
        if self.min_pts2 == 0 {
            return Err(Error::config("clustering.min_pts2", "must be at least 1"));
        }
        if !(self.planarity_threshold > 0.0 && self.planarity_threshold < 1.0) {
            return Err(Error::config("clustering.planarity_threshold", "must be in (0, 1)"));
        }
        if let PlanarityMode::PerPoint { k } = self.planarity_mode {
            if k < 3 {
                return Err(Error::config("clustering.planarity_mode.k", "must be at least 3"));
            }
        }
        Ok(())
    }

    /// Eps used for one frame under the adaptive schedule.
    pub fn frame_eps(&self, points: &[Point3]) -> f64 {
        match self.adaptive_eps_factor {
            None => self.eps,
            Some(f) => median_neighbor_distance(points, self.eps)
                .map_or(self.eps, |m| self.eps.max(f * m)),
        }
    }
}

/// Per-frame clustering with the configured schedule, dropping clusters
/// smaller than `min_cluster_points` (their points become noise, and ids are
/// re-densified).
pub fn cluster_frame(points: &[Point3], params: &ClusteringParams) -> Vec<ClusterLabel> {
    let mut labels = dbscan(points, params.frame_eps(points), params.min_pts);
    let n = cluster_count(&labels);
    let mut sizes = vec![0usize; n];
    for l in &labels {
        if let Some(c) = l.id() {
            sizes[c as usize] += 1;
        }
    }
    let mut remap = vec![None; n];
    let mut next = 0u32;
    for (c, &s) in sizes.iter().enumerate() {
        if s >= params.min_cluster_points {
            remap[c] = Some(next);
            next += 1;
        }
    }
    for l in labels.iter_mut() {
        if let Some(c) = l.id() {
            *l = remap[c as usize].map_or(ClusterLabel::Noise, ClusterLabel::Cluster);
        }
    }
    labels
}

/// One per-frame cluster summarized by its centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameCluster {
    pub frame_id: u64,
    pub cluster_id: u32,
    pub centroid: Point3,
}

/// DBSCAN over per-frame cluster centroids. Centroids that end up as noise
/// get their own singleton ids after the shared ones, in input order.
pub fn super_cluster(frame_clusters: &[FrameCluster], eps2: f64, min_pts2: usize) -> BTreeMap<(u64, u32), u32> {
    let centroids: Vec<Point3> = frame_clusters.iter().map(|f| f.centroid).collect();
    let labels = dbscan(&centroids, eps2, min_pts2);
    let mut next = cluster_count(&labels) as u32;
    let mut out = BTreeMap::new();
    for (fc, l) in frame_clusters.iter().zip(labels) {
        let id = l.id().unwrap_or_else(|| {
            next += 1;
            next - 1
        });
        out.insert((fc.frame_id, fc.cluster_id), id);
    }
    out
}

/// Replaces the points falling in each `size` voxel by their centroid.
/// Output is ordered by voxel index.
pub fn voxel_downsample(points: &[Point3], size: f64) -> Vec<Point3> {
    let mut cells: BTreeMap<(i64, i64, i64), (Point3, usize)> = BTreeMap::new();
    for p in points {
        let key = (
            (p.x / size).floor() as i64,
            (p.y / size).floor() as i64,
            (p.z / size).floor() as i64,
        );
        let e = cells.entry(key).or_insert((Point3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    cells.into_values().map(|(s, n)| s / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc(frame: u64, id: u32, x: f64) -> FrameCluster {
        FrameCluster { frame_id: frame, cluster_id: id, centroid: Point3::new(x, 0.0, 0.0) }
    }

    #[test]
    fn downsample_averages_per_voxel() {
        let pts = [Point3::new(0.1, 0.1, 0.1), Point3::new(0.3, 0.1, 0.1), Point3::new(1.2, 0.0, 0.0)];
        let d = voxel_downsample(&pts, 1.0);
        assert_eq!(d.len(), 2);
        assert!((d[0] - Point3::new(0.2, 0.1, 0.1)).norm() < 1e-12);
    }

    #[test]
    fn drifting_object_gets_one_id() {
        let m = super_cluster(&[fc(0, 0, 0.0), fc(1, 0, 0.05), fc(2, 0, 0.1)], 0.5, 2);
        assert_eq!(m.len(), 3);
        assert!(m.values().all(|&v| v == 0));
    }

    #[test]
    fn separate_objects_get_separate_ids() {
        let m = super_cluster(&[fc(0, 0, 0.0), fc(0, 1, 5.0)], 0.5, 2);
        assert_ne!(m[&(0, 0)], m[&(0, 1)]);
    }

    #[test]
    fn empty_input() {
        assert!(super_cluster(&[], 0.5, 2).is_empty());
    }

    #[test]
    fn small_clusters_dropped() {
        let mut pts: Vec<Point3> = (0..30).map(|i| Point3::new(0.1 * i as f64, 0.0, 0.0)).collect();
        pts.extend((0..6).map(|i| Point3::new(20.0 + 0.1 * i as f64, 0.0, 0.0)));
        let params = ClusteringParams { min_cluster_points: 10, ..Default::default() };
        let l = cluster_frame(&pts, &params);
        assert_eq!(cluster_count(&l), 1);
        assert!(l[30..].iter().all(|x| *x == ClusterLabel::Noise));
    }
}
