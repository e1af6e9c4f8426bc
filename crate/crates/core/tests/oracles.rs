//! Implementations checked against independent brute-force references.

use std::collections::{HashMap, HashSet};

use lidarprior::boxes::{convex_hull, min_area_rect};
use lidarprior::clustering::{dbscan, ClusterLabel};
use lidarprior::Point3;
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook O(n^2) DBSCAN.
fn brute_dbscan(pts: &[Point3], eps: f64, min_pts: usize) -> (Vec<Option<usize>>, Vec<bool>) {
    let n = pts.len();
    let nb: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| (pts[i] - pts[j]).norm() <= eps).collect())
        .collect();
    let core: Vec<bool> = nb.iter().map(|v| v.len() >= min_pts).collect();
    let mut label = vec![None; n];
    let mut c = 0;
    for i in 0..n {
        if !core[i] || label[i].is_some() {
            continue;
        }
        let mut stack = vec![i];
        label[i] = Some(c);
        while let Some(p) = stack.pop() {
            if !core[p] {
                continue;
            }
            for &q in &nb[p] {
                if label[q].is_none() {
                    label[q] = Some(c);
                    stack.push(q);
                }
            }
        }
        c += 1;
    }
    (label, core)
}

/// Core points must be partitioned identically (up to renaming), noise must
/// coincide, and every border point must sit in a cluster owning a core
/// point within eps of it.
fn equivalent(pts: &[Point3], eps: f64, got: &[ClusterLabel], want: &[Option<usize>], core: &[bool]) -> Result<(), String> {
    let mut fwd: HashMap<u32, usize> = HashMap::new();
    let mut back: HashMap<usize, u32> = HashMap::new();
    for i in 0..pts.len() {
        match (got[i].id(), want[i]) {
            (None, None) => {}
            (Some(g), Some(w)) if core[i] => {
                if *fwd.entry(g).or_insert(w) != w || *back.entry(w).or_insert(g) != g {
                    return Err(format!("core point {i} split differently"));
                }
            }
            (Some(_), Some(_)) => {}
            _ => return Err(format!("noise mismatch at {i}")),
        }
    }
    for i in (0..pts.len()).filter(|&i| !core[i]) {
        if let Some(g) = got[i].id() {
            let ok = (0..pts.len()).any(|j| core[j] && got[j].id() == Some(g) && (pts[i] - pts[j]).norm() <= eps);
            if !ok {
                return Err(format!("border point {i} not adjacent to its cluster"));
            }
        }
    }
    Ok(())
}

#[test]
fn dbscan_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..60 {
        let n = rng.random_range(1..=300);
        let blobs = rng.random_range(1..6);
        let centers: Vec<Point3> = (0..blobs)
            .map(|_| Point3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-2.0..2.0)))
            .collect();
        let pts: Vec<Point3> = (0..n)
            .map(|_| {
                let c = centers[rng.random_range(0..blobs)];
                c + Point3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-0.5..0.5))
            })
            .collect();
        let eps = rng.random_range(0.2..1.0);
        let min_pts = rng.random_range(1..8);
        let got = dbscan(&pts, eps, min_pts);
        let (want, core) = brute_dbscan(&pts, eps, min_pts);
        equivalent(&pts, eps, &got, &want, &core).unwrap_or_else(|e| panic!("trial {trial}: {e}"));
    }
}

#[test]
fn dbscan_two_blob_example_matches_oracle() {
    let mut pts = Vec::new();
    for off in [0.0, 10.0] {
        for i in 0..50 {
            pts.push(Point3::new(off + 0.1 * (i % 10) as f64, 0.1 * (i / 10) as f64, 0.0));
        }
    }
    let (want, _) = brute_dbscan(&pts, 0.5, 3);
    let distinct: HashSet<_> = want.iter().flatten().collect();
    assert_eq!(distinct.len(), 2);
    assert!(want.iter().all(Option::is_some));
    let got = dbscan(&pts, 0.5, 3);
    assert_eq!(got.iter().filter_map(|l| l.id()).collect::<HashSet<_>>().len(), 2);
}

#[test]
fn dbscan_core_set_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<Point3> = (0..300)
        .map(|_| Point3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), 0.0))
        .collect();
    let core = lidarprior::clustering::core_points(&pts, 0.5, 4);
    let mut perm: Vec<usize> = (0..pts.len()).collect();
    perm.reverse();
    perm.rotate_left(17);
    let shuffled: Vec<Point3> = perm.iter().map(|&i| pts[i]).collect();
    let core2 = lidarprior::clustering::core_points(&shuffled, 0.5, 4);
    for (k, &i) in perm.iter().enumerate() {
        assert_eq!(core[i], core2[k]);
    }
}

/// Area of the bounding rectangle of `pts` when rotated by `-angle`.
fn rect_area(pts: &[Vector2<f64>], angle: f64) -> f64 {
    let (s, c) = angle.sin_cos();
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        let (u, v) = (c * p.x + s * p.y, -s * p.x + c * p.y);
        u0 = u0.min(u);
        u1 = u1.max(u);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    (u1 - u0) * (v1 - v0)
}

/// Exhaustive 0.1 degree sweep over a quarter turn, then local refinement
/// of the best few sweep angles down to 1e-10 rad.
fn sweep_min_area(pts: &[Vector2<f64>]) -> f64 {
    let step = 0.1f64.to_radians();
    let n = (90.0 / 0.1) as usize;
    let mut grid: Vec<(f64, f64)> = (0..n).map(|i| (rect_area(pts, i as f64 * step), i as f64 * step)).collect();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = grid[0].0;
    for &(_, a0) in grid.iter().take(8) {
        let (mut a, mut h) = (a0, step);
        while h > 1e-10 {
            let cands = [a - h, a, a + h];
            a = cands.into_iter().min_by(|x, y| rect_area(pts, *x).total_cmp(&rect_area(pts, *y))).unwrap();
            h *= 0.5;
        }
        best = best.min(rect_area(pts, a));
    }
    best
}

#[test]
fn calipers_match_rotation_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..40 {
        let n = rng.random_range(3..40);
        let sx = rng.random_range(0.5..5.0);
        let sy = rng.random_range(0.5..5.0);
        let pts: Vec<Vector2<f64>> = (0..n)
            .map(|_| Vector2::new(rng.random_range(-sx..sx), rng.random_range(-sy..sy)))
            .collect();
        let hull = convex_hull(&pts);
        let rect = min_area_rect(&hull);
        let oracle = sweep_min_area(&pts);
        assert!(rect.area() <= rect_area(&pts, 0.0) + 1e-12);
        assert!(((rect.area() - oracle) / oracle).abs() < 1e-6, "calipers {} oracle {}", rect.area(), oracle);
    }
}
