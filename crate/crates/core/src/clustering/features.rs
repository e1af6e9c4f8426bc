use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::spatial::PointGrid;

/// Eigenvalues of the covariance of the centered points, descending and
/// clipped at zero.
pub fn structure_tensor(points: &[Point3]) -> Result<[f64; 3]> {
    if points.len() < 3 {
        return Err(Error::Insufficient(format!(
            "structure tensor needs 3 points, got {}",
            points.len()
        )));
    }
    Ok(tensor_eigenvalues(points.iter()))
}

fn tensor_eigenvalues<'a>(points: impl Iterator<Item = &'a Point3> + Clone) -> [f64; 3] {
    let mut n = 0usize;
    let mut sum = Point3::zeros();
    for p in points.clone() {
        sum += p;
        n += 1;
    }
    let c = sum / n as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= n as f64;
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().map(|v| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    [ev[0], ev[1], ev[2]]
}

/// `(l2 - l3) / l1` for descending eigenvalues.
pub fn planarity(l1: f64, l2: f64, l3: f64) -> Result<f64> {
    if !(l1 >= l2 && l2 >= l3 && l3 >= 0.0) {
        return Err(Error::Domain(format!(
            "eigenvalues must satisfy l1 >= l2 >= l3 >= 0, got ({l1}, {l2}, {l3})"
        )));
    }
    if l1 == 0.0 {
        return Err(Error::Degenerate("planarity undefined for a zero tensor".into()));
    }
    Ok(((l2 - l3) / l1).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Planar,
    Volumetric,
}

/// Planar iff `p >= threshold`.
pub fn classify_cluster(p: f64, threshold: f64) -> ShapeClass {
    if p >= threshold {
        ShapeClass::Planar
    } else {
        ShapeClass::Volumetric
    }
}

/// Which planarity value drives the planar/volumetric decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlanarityMode {
    /// Mean over points of the planarity of each point's `k` nearest
    /// neighbours.
    PerPoint { k: usize },
    /// Planarity of the single tensor of the whole cluster.
    Cluster,
}

impl Default for PlanarityMode {
    fn default() -> Self {
        PlanarityMode::PerPoint { k: 15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterFeatures {
    pub centroid: Point3,
    pub point_count: usize,
    /// Whole-cluster tensor eigenvalues, descending.
    pub eigenvalues: [f64; 3],
    /// Planarity of the whole-cluster tensor.
    pub planarity: f64,
    /// The value compared against the planarity threshold, per the mode.
    pub shape_score: f64,
}

/// Mean local planarity over `k`-nearest-neighbour patches. Degenerate
/// patches (all neighbours coincident) count as zero.
pub fn mean_point_planarity(points: &[Point3], k: usize) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let k = k.clamp(3, points.len());
    let spread = bbox_diagonal(points);
    let cell = (spread / (points.len() as f64).cbrt()).max(1e-6);
    let grid = PointGrid::new(points, cell);
    let total: f64 = points
        .iter()
        .map(|p| {
            let nb = grid.nearest(p, k);
            let ev = tensor_eigenvalues(nb.iter().map(|&i| &points[i]));
            planarity(ev[0], ev[1], ev[2]).unwrap_or(0.0)
        })
        .sum();
    total / points.len() as f64
}

fn bbox_diagonal(points: &[Point3]) -> f64 {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

pub fn cluster_features(points: &[Point3], mode: PlanarityMode) -> Result<ClusterFeatures> {
    let eigenvalues = structure_tensor(points)?;
    let planarity = planarity(eigenvalues[0], eigenvalues[1], eigenvalues[2])?;
    let shape_score = match mode {
        PlanarityMode::Cluster => planarity,
        PlanarityMode::PerPoint { k } => mean_point_planarity(points, k),
    };
    let centroid = points.iter().sum::<Point3>() / points.len() as f64;
    Ok(ClusterFeatures {
        centroid,
        point_count: points.len(),
        eigenvalues,
        planarity,
        shape_score,
    })
}
