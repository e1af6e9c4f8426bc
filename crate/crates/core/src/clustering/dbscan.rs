use std::collections::VecDeque;

use crate::geometry::Point3;
use crate::spatial::PointGrid;

/// Per-point DBSCAN outcome. Cluster ids are dense, in order of discovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClusterLabel {
    Noise,
    Cluster(u32),
}

impl ClusterLabel {
    pub fn id(self) -> Option<u32> {
        match self {
            ClusterLabel::Noise => None,
            ClusterLabel::Cluster(c) => Some(c),
        }
    }

    /// `-1` for noise, the id otherwise.
    pub fn code(self) -> i64 {
        self.id().map_or(-1, i64::from)
    }
}

/// Number of clusters in a label vector.
pub fn cluster_count(labels: &[ClusterLabel]) -> usize {
    labels
        .iter()
        .filter_map(|l| l.id())
        .max()
        .map_or(0, |m| m as usize + 1)
}

/// Classic DBSCAN. A point is core when at least `min_pts` points (itself
/// included) lie within `eps`; clusters are the connected components of
/// core points plus the border points they reach. A border point reachable
/// from several clusters joins the first one expanded, and expansion visits
/// seeds in index order.
pub fn dbscan(points: &[Point3], eps: f64, min_pts: usize) -> Vec<ClusterLabel> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");
    let n = points.len();
    let mut labels = vec![ClusterLabel::Noise; n];
    if n == 0 {
        return labels;
    }
    let grid = PointGrid::new(points, eps);
    let mut neigh: Vec<Vec<u32>> = Vec::with_capacity(n);
    let mut buf = Vec::new();
    for p in points {
        grid.within(p, eps, &mut buf);
        neigh.push(buf.iter().map(|&i| i as u32).collect());
    }
    let core: Vec<bool> = neigh.iter().map(|v| v.len() >= min_pts).collect();

    let mut assigned = vec![false; n];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !core[seed] || assigned[seed] {
            continue;
        }
        let id = next;
        next += 1;
        assigned[seed] = true;
        labels[seed] = ClusterLabel::Cluster(id);
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for &q in &neigh[p] {
                let q = q as usize;
                if assigned[q] {
                    continue;
                }
                assigned[q] = true;
                labels[q] = ClusterLabel::Cluster(id);
                if core[q] {
                    queue.push_back(q);
                }
            }
        }
    }
    labels
}

/// Core-point mask under the same neighbourhood rule as [`dbscan`].
pub fn core_points(points: &[Point3], eps: f64, min_pts: usize) -> Vec<bool> {
    let grid = PointGrid::new(points, eps);
    let mut buf = Vec::new();
    points
        .iter()
        .map(|p| {
            grid.within(p, eps, &mut buf);
            buf.len() >= min_pts
        })
        .collect()
}

/// Median distance from each point to its nearest other point.
pub fn median_neighbor_distance(points: &[Point3], cell: f64) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let grid = PointGrid::new(points, cell);
    let mut d: Vec<f64> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            grid.nearest(p, 2)
                .into_iter()
                .find(|&j| j != i)
                .map(|j| (points[j] - p).norm())
        })
        .collect();
    if d.is_empty() {
        return None;
    }
    let mid = d.len() / 2;
    d.select_nth_unstable_by(mid, f64::total_cmp);
    Some(d[mid])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_separated_blobs() {
        let mut pts = Vec::new();
        for off in [0.0, 10.0] {
            for i in 0..50 {
                pts.push(Point3::new(off + 0.1 * (i % 10) as f64, 0.1 * (i / 10) as f64, 0.0));
            }
        }
        let l = dbscan(&pts, 0.5, 3);
        assert_eq!(cluster_count(&l), 2);
        assert!(l.iter().all(|x| *x != ClusterLabel::Noise));
        assert!(l[..50].iter().all(|x| *x == l[0]));
        assert!(l[50..].iter().all(|x| *x == l[50]));
    }

    #[test]
    fn isolated_point_is_noise() {
        assert_eq!(dbscan(&[Point3::zeros()], 1.0, 2), vec![ClusterLabel::Noise]);
        assert_eq!(dbscan(&[Point3::zeros()], 1.0, 1), vec![ClusterLabel::Cluster(0)]);
    }

    #[test]
    fn min_pts_mutual_neighbours_form_one_cluster() {
        let pts: Vec<Point3> = (0..5).map(|i| Point3::new(0.1 * i as f64, 0.0, 0.0)).collect();
        let l = dbscan(&pts, 1.0, 5);
        assert!(l.iter().all(|x| *x == ClusterLabel::Cluster(0)));
    }

    #[test]
    fn empty_input() {
        assert!(dbscan(&[], 0.5, 3).is_empty());
    }

    #[test]
    fn median_spacing() {
        let pts: Vec<Point3> = (0..20).map(|i| Point3::new(0.25 * i as f64, 0.0, 0.0)).collect();
        assert!((median_neighbor_distance(&pts, 1.0).unwrap() - 0.25).abs() < 1e-12);
    }
}
