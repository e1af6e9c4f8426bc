use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit_plane_least_squares, PlaneModel};
use crate::error::{Error, Result};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    /// Inlier distance; large enough to absorb mild road curvature.
    pub dist_threshold: f64,
    pub max_iterations: usize,
    /// Stop early once this confidence of having drawn an all-inlier triple
    /// is reached. 1.0 always runs `max_iterations`.
    pub confidence: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            dist_threshold: 0.3,
            max_iterations: 200,
            confidence: 0.999,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dist_threshold > 0.0) {
            return Err(Error::config("ransac.dist_threshold", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("ransac.max_iterations", "must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(Error::config("ransac.confidence", "must be in (0, 1]"));
        }
        Ok(())
    }
}

fn count_inliers(points: &[Point3], normal: &nalgebra::Vector3<f64>, offset: f64, thr: f64) -> usize {
    points
        .iter()
        .filter(|p| (normal.dot(p) + offset).abs() <= thr)
        .count()
}

/// Fits the plane supported by the most points.
///
/// Triples are drawn from a ChaCha stream seeded with `seed`, so the sampled
/// indices depend only on the seed and the point count. The best triple's
/// inliers are refit by least squares and the returned count is measured
/// against the refit plane.
pub fn ransac_plane(points: &[Point3], params: &RansacParams, seed: u64) -> Result<(PlaneModel, usize)> {
    params.validate()?;
    let n = points.len();
    if n < 3 {
        return Err(Error::Insufficient(format!("plane fit needs 3 points, got {n}")));
    }
    let thr = params.dist_threshold;
    let scale = points.iter().map(|p| p.norm()).fold(1.0f64, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(nalgebra::Vector3<f64>, f64, usize)> = None;
    let mut needed = params.max_iterations;
    let mut iter = 0;
    while iter < needed.min(params.max_iterations) {
        iter += 1;
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let mut c = rng.random_range(0..n - 2);
        let (lo, hi) = (a.min(b), a.max(b));
        if c >= lo {
            c += 1;
        }
        if c >= hi {
            c += 1;
        }
        let (pa, pb, pc) = (points[a], points[b], points[c]);
        let cross = (pb - pa).cross(&(pc - pa));
        let len = cross.norm();
        if !(len > 1e-12 * scale * scale) {
            continue;
        }
        let normal = cross / len;
        let offset = -normal.dot(&pa);
        let count = count_inliers(points, &normal, offset, thr);
        if best.as_ref().is_none_or(|b| count > b.2) {
            best = Some((normal, offset, count));
            if params.confidence < 1.0 {
                let w = count as f64 / n as f64;
                let p_good = w * w * w;
                needed = if p_good >= 1.0 {
                    iter
                } else {
                    ((1.0 - params.confidence).ln() / (1.0 - p_good).ln()).ceil() as usize
                };
            }
        }
    }
    let (normal, offset, _) = best.ok_or_else(|| {
        Error::Degenerate(format!("all sampled triples collinear after {iter} iterations"))
    })?;

    let inliers = points.iter().filter(|p| (normal.dot(p) + offset).abs() <= thr);
    let (normal, offset) = fit_plane_least_squares(inliers).unwrap_or((normal, offset));
    let plane = PlaneModel::new(normal, offset, thr)
        .ok_or_else(|| Error::Degenerate("refined plane has no normal".into()))?;
    let count = count_inliers(points, &plane.normal, plane.offset, thr);
    Ok((plane, count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn three_points_define_the_plane() {
        let pts = [Point3::new(0.0, 0.0, 1.0), Point3::new(1.0, 0.0, 1.0), Point3::new(0.0, 1.0, 1.0)];
        let (pl, n) = ransac_plane(&pts, &RansacParams::default(), 0).unwrap();
        assert_eq!(n, 3);
        assert!((pl.normal - Vector3::z()).norm() < 1e-12);
        assert!((pl.offset + 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.5)).collect();
        let params = RansacParams { max_iterations: 50, ..Default::default() };
        assert!(matches!(ransac_plane(&pts, &params, 3), Err(Error::Degenerate(_))));
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            ransac_plane(&[Point3::zeros(), Point3::x()], &RansacParams::default(), 0),
            Err(Error::Insufficient(_))
        ));
    }

    #[test]
    fn planted_plane_with_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut pts: Vec<Point3> = (0..1000)
            .map(|_| Point3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), noise.sample(&mut rng)))
            .collect();
        pts.extend((0..100).map(|_| {
            Point3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(2.0..10.0))
        }));
        let params = RansacParams { dist_threshold: 0.1, ..Default::default() };
        let (pl, n) = ransac_plane(&pts, &params, 5).unwrap();
        assert!(pl.normal.z.acos().to_degrees() < 1.0);
        assert!(pl.offset.abs() < 0.05);
        assert!((990..=1000).contains(&n), "{n}");
    }

    #[test]
    fn deterministic_for_seed() {
        let pts: Vec<Point3> = (0..200).map(|i| Point3::new((i % 20) as f64, (i / 20) as f64, 0.01 * (i % 7) as f64)).collect();
        let a = ransac_plane(&pts, &RansacParams::default(), 9).unwrap();
        let b = ransac_plane(&pts, &RansacParams::default(), 9).unwrap();
        assert_eq!(a, b);
    }
}
