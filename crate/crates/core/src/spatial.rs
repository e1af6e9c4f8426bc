//! Uniform hash grid over 3D points for radius and k-nearest queries.

use std::collections::HashMap;

use crate::geometry::Point3;

type Key = (i64, i64, i64);

pub struct PointGrid<'a> {
    points: &'a [Point3],
    cell: f64,
    buckets: HashMap<Key, Vec<u32>>,
    lo: Key,
    hi: Key,
}

impl<'a> PointGrid<'a> {
    pub fn new(points: &'a [Point3], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell size must be positive");
        let mut buckets: HashMap<Key, Vec<u32>> = HashMap::new();
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let k = key(p, cell);
            lo = (lo.0.min(k.0), lo.1.min(k.1), lo.2.min(k.2));
            hi = (hi.0.max(k.0), hi.1.max(k.1), hi.2.max(k.2));
            buckets.entry(k).or_default().push(i as u32);
        }
        PointGrid {
            points,
            cell,
            buckets,
            lo,
            hi,
        }
    }

    pub fn points(&self) -> &[Point3] {
        self.points
    }

    /// Indices of all points with `|p - q| <= radius`, in ascending order.
    pub fn within(&self, q: &Point3, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let r2 = radius * radius;
        let reach = (radius / self.cell).ceil() as i64;
        let c = key(q, self.cell);
        for i in c.0 - reach..=c.0 + reach {
            for j in c.1 - reach..=c.1 + reach {
                for k in c.2 - reach..=c.2 + reach {
                    if let Some(b) = self.buckets.get(&(i, j, k)) {
                        out.extend(
                            b.iter()
                                .map(|&idx| idx as usize)
                                .filter(|&idx| (self.points[idx] - q).norm_squared() <= r2),
                        );
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// The `k` nearest points to `q` (including `q` itself if it is in the
    /// set), nearest first; ties broken by index.
    pub fn nearest(&self, q: &Point3, k: usize) -> Vec<usize> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let c = key(q, self.cell);
        let max_ring = [
            (c.0 - self.lo.0).abs(),
            (self.hi.0 - c.0).abs(),
            (c.1 - self.lo.1).abs(),
            (self.hi.1 - c.1).abs(),
            (c.2 - self.lo.2).abs(),
            (self.hi.2 - c.2).abs(),
        ]
        .into_iter()
        .max()
        .unwrap();
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        let visit = |idx: u32, best: &mut Vec<(f64, usize)>| {
            let cand = ((self.points[idx as usize] - q).norm_squared(), idx as usize);
            if best.len() < k || cand < best[best.len() - 1] {
                let pos = best.partition_point(|e| *e < cand);
                best.insert(pos, cand);
                best.truncate(k);
            }
        };
        for ring in 0..=max_ring {
            let span = |c: i64, lo: i64, hi: i64| (c - ring).max(lo)..=(c + ring).min(hi);
            for i in span(c.0, self.lo.0, self.hi.0) {
                let edge_i = (i - c.0).abs() == ring;
                for j in span(c.1, self.lo.1, self.hi.1) {
                    let edge_j = edge_i || (j - c.1).abs() == ring;
                    if edge_j {
                        for kk in span(c.2, self.lo.2, self.hi.2) {
                            if let Some(b) = self.buckets.get(&(i, j, kk)) {
                                b.iter().for_each(|&idx| visit(idx, &mut best));
                            }
                        }
                    } else {
                        for kk in [c.2 - ring, c.2 + ring] {
                            if kk < self.lo.2 || kk > self.hi.2 {
                                continue;
                            }
                            if let Some(b) = self.buckets.get(&(i, j, kk)) {
                                b.iter().for_each(|&idx| visit(idx, &mut best));
                            }
                        }
                    }
                }
            }
            // Anything outside the visited shells is at least ring * cell away.
            let bound = ring as f64 * self.cell;
            if best.len() == k && best[k - 1].0 <= bound * bound {
                break;
            }
        }
        best.into_iter().map(|(_, i)| i).collect()
    }
}

fn key(p: &Point3, cell: f64) -> Key {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}
