//! Ground-surface extraction: a single RANSAC plane for the whole map, or a
//! per-scan depth image and v-disparity road line for uneven roads.

mod ransac;
mod vdisparity;

pub use ransac::{ransac_plane, RansacParams};
pub use vdisparity::{
    build_depth_image, classify_road, compute_vdisparity, fit_road_line, DepthImage, DepthImageStats,
    DisparityModel, RoadClass, RoadClassification, RoadLine, RoadLineParams, VDisparityHistogram,
};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::cloud::PointCloud;
use crate::geometry::Point3;

/// The plane `normal . p + offset = 0` with a unit normal whose z component
/// is non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneModel {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub inlier_threshold: f64,
}

impl PlaneModel {
    /// Normalizes and flips `normal` into canonical orientation. Returns
    /// `None` for a zero or non-finite normal.
    pub fn new(normal: Vector3<f64>, offset: f64, inlier_threshold: f64) -> Option<Self> {
        let len = normal.norm();
        if !(len > 0.0 && len.is_finite() && offset.is_finite()) {
            return None;
        }
        let (mut n, mut d) = (normal / len, offset / len);
        let flip = if n.z.abs() > 1e-12 {
            n.z < 0.0
        } else if n.y.abs() > 1e-12 {
            n.y < 0.0
        } else {
            n.x < 0.0
        };
        if flip {
            n = -n;
            d = -d;
        }
        Some(PlaneModel {
            normal: n,
            offset: d,
            inlier_threshold,
        })
    }

    #[inline]
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(p) + self.offset
    }

    /// Angle between the two normals, in radians.
    pub fn angle_to(&self, other: &PlaneModel) -> f64 {
        self.normal.dot(&other.normal).clamp(-1.0, 1.0).acos()
    }
}

/// Least-squares plane through `points`: the centroid and the direction of
/// least variance.
pub(crate) fn fit_plane_least_squares<'a>(
    points: impl Iterator<Item = &'a Point3> + Clone,
) -> Option<(Vector3<f64>, f64)> {
    let mut n = 0usize;
    let mut sum = Vector3::zeros();
    for p in points.clone() {
        sum += p;
        n += 1;
    }
    if n < 3 {
        return None;
    }
    let c = sum / n as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let normal: Vector3<f64> = eig.eigenvectors.column(imin).into();
    Some((normal, -normal.dot(&c)))
}

/// Splits `cloud` into points within `margin` of the plane and the rest,
/// each keeping the input order.
pub fn partition_by_plane(cloud: &PointCloud, plane: &PlaneModel, margin: f64) -> (PointCloud, PointCloud) {
    let (inl, out): (Vec<usize>, Vec<usize>) =
        (0..cloud.len()).partition(|&i| plane.signed_distance(&cloud.points[i]).abs() <= margin);
    (cloud.select(&inl), cloud.select(&out))
}
