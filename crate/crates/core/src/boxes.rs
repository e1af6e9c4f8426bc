//! Gravity-aligned oriented boxes: fitting, containment and overlap.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, SymmetricEigen, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Point3;

/// A box rotated by `yaw` about the z axis. `margin` inflates every half
/// extent additively when testing containment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Point3,
    /// In (-pi/2, pi/2]; the box is symmetric under a half turn.
    pub yaw: f64,
    pub half_extents: Vector3<f64>,
    pub margin: f64,
}

/// Maps `yaw` into (-pi/2, pi/2].
pub fn canonical_yaw(yaw: f64) -> f64 {
    let mut y = yaw.rem_euclid(PI);
    if y > FRAC_PI_2 {
        y -= PI;
    }
    y
}

impl OrientedBox {
    pub fn new(center: Point3, yaw: f64, half_extents: Vector3<f64>) -> Self {
        OrientedBox {
            center,
            yaw: canonical_yaw(yaw),
            half_extents: half_extents.map(|v| v.max(0.0)),
            margin: 0.0,
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin.max(0.0);
        self
    }

    /// Coordinates of `p` in the box frame.
    #[inline]
    pub fn to_local(&self, p: &Point3) -> Point3 {
        let (s, c) = self.yaw.sin_cos();
        let d = p - self.center;
        Point3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }

    #[inline]
    pub fn contains(&self, p: &Point3) -> bool {
        self.contains_with(p, self.margin)
    }

    #[inline]
    pub fn contains_with(&self, p: &Point3, margin: f64) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_extents.x + margin
            && l.y.abs() <= self.half_extents.y + margin
            && l.z.abs() <= self.half_extents.z + margin
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn footprint_area(&self) -> f64 {
        4.0 * self.half_extents.x * self.half_extents.y
    }

    /// Footprint corners, counter-clockwise.
    pub fn footprint(&self) -> [Vector2<f64>; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (ax, ay) = (Vector2::new(c, s), Vector2::new(-s, c));
        let ctr = Vector2::new(self.center.x, self.center.y);
        let (hx, hy) = (self.half_extents.x, self.half_extents.y);
        [
            ctr - ax * hx - ay * hy,
            ctr + ax * hx - ay * hy,
            ctr + ax * hx + ay * hy,
            ctr - ax * hx + ay * hy,
        ]
    }

    /// Radius of the sphere around `center` enclosing the inflated box.
    pub fn bounding_radius(&self) -> f64 {
        (self.half_extents.add_scalar(self.margin)).norm()
    }
}

/// Convex hull in counter-clockwise order without collinear vertices
/// (monotone chain). Duplicate inputs collapse.
pub fn convex_hull(points: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut p: Vec<Vector2<f64>> = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| (a - o).perp(&(b - o));
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for q in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(*q);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        // All points collinear: keep the two extremes.
        return vec![p[0], p[p.len() - 1]];
    }
    hull
}

/// Minimum-area enclosing rectangle of a convex hull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinAreaRect {
    pub center: Vector2<f64>,
    pub yaw: f64,
    pub half_extents: Vector2<f64>,
}

impl MinAreaRect {
    pub fn area(&self) -> f64 {
        4.0 * self.half_extents.x * self.half_extents.y
    }
}

/// Rotating calipers over a counter-clockwise hull. One side of the optimal
/// rectangle is collinear with a hull edge; for each edge the three other
/// supporting vertices only ever advance, so the sweep is linear.
pub fn min_area_rect(hull: &[Vector2<f64>]) -> MinAreaRect {
    match hull.len() {
        0 => {
            return MinAreaRect {
                center: Vector2::zeros(),
                yaw: 0.0,
                half_extents: Vector2::zeros(),
            }
        }
        1 => {
            return MinAreaRect {
                center: hull[0],
                yaw: 0.0,
                half_extents: Vector2::zeros(),
            }
        }
        2 => {
            let d = hull[1] - hull[0];
            return MinAreaRect {
                center: (hull[0] + hull[1]) / 2.0,
                yaw: canonical_yaw(d.y.atan2(d.x)),
                half_extents: Vector2::new(d.norm() / 2.0, 0.0),
            };
        }
        _ => {}
    }
    let m = hull.len();
    let at = |i: usize| hull[i % m];
    let edge_dir = |i: usize| (at(i + 1) - at(i)).normalize();

    let u0 = edge_dir(0);
    let v0 = Vector2::new(-u0.y, u0.x);
    let argmax = |f: &dyn Fn(&Vector2<f64>) -> f64| {
        (0..m).max_by(|&a, &b| f(&hull[a]).total_cmp(&f(&hull[b])).then(b.cmp(&a))).unwrap()
    };
    let mut j = argmax(&|p| u0.dot(p));
    let mut k = argmax(&|p| v0.dot(p));
    let mut l = argmax(&|p| -u0.dot(p));

    let mut best: Option<(f64, MinAreaRect)> = None;
    for i in 0..m {
        let u = edge_dir(i);
        let v = Vector2::new(-u.y, u.x);
        let base = at(i);
        for _ in 0..m {
            if u.dot(&(at(j + 1) - at(j))) > 0.0 { j += 1 } else { break }
        }
        for _ in 0..m {
            if v.dot(&(at(k + 1) - at(k))) > 0.0 { k += 1 } else { break }
        }
        for _ in 0..m {
            if u.dot(&(at(l + 1) - at(l))) < 0.0 { l += 1 } else { break }
        }
        let max_u = u.dot(&(at(j) - base));
        let min_u = u.dot(&(at(l) - base));
        let max_v = v.dot(&(at(k) - base));
        let area = (max_u - min_u) * max_v;
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            let center = base + u * (0.5 * (max_u + min_u)) + v * (0.5 * max_v);
            best = Some((
                area,
                MinAreaRect {
                    center,
                    yaw: canonical_yaw(u.y.atan2(u.x)),
                    half_extents: Vector2::new(0.5 * (max_u - min_u), 0.5 * max_v),
                },
            ));
        }
    }
    best.unwrap().1
}

/// Gravity-aligned minimum-volume box: z from the point range, footprint
/// from the minimum-area rectangle of the xy hull.
pub fn fit_min_volume_box(points: &[Point3]) -> Result<OrientedBox> {
    if points.is_empty() {
        return Err(Error::Insufficient("box fit needs at least one point".into()));
    }
    let xy: Vec<Vector2<f64>> = points.iter().map(|p| Vector2::new(p.x, p.y)).collect();
    let rect = min_area_rect(&convex_hull(&xy));
    let (zmin, zmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.z), b.max(p.z)));
    Ok(OrientedBox::new(
        Point3::new(rect.center.x, rect.center.y, 0.5 * (zmin + zmax)),
        rect.yaw,
        Vector3::new(rect.half_extents.x, rect.half_extents.y, 0.5 * (zmax - zmin)),
    ))
}

/// Gravity-aligned box for an object seen from one side. Among candidate
/// headings (hull edge directions plus a 1 degree sweep) it keeps the one
/// whose xy bounding rectangle leaves the points closest to its edges,
/// smaller area first on ties. Points on one or two visible faces then line
/// up with the box sides; the minimum-area rectangle of such an L-shaped
/// hull can instead align with the diagonal at equal area.
pub fn fit_lshape_box(points: &[Point3]) -> Result<OrientedBox> {
    if points.is_empty() {
        return Err(Error::Insufficient("box fit needs at least one point".into()));
    }
    let step = points.len().div_ceil(2000);
    let xy: Vec<Vector2<f64>> = points.iter().step_by(step).map(|p| Vector2::new(p.x, p.y)).collect();
    let hull = convex_hull(&xy);
    let mut angles: Vec<f64> = (0..90).map(|d| (d as f64).to_radians()).collect();
    for i in 0..hull.len() {
        let e = hull[(i + 1) % hull.len()] - hull[i];
        angles.push(e.y.atan2(e.x).rem_euclid(FRAC_PI_2));
    }
    let mut best: Option<(f64, f64, f64, [f64; 4])> = None;
    for &a in &angles {
        let (s, c) = a.sin_cos();
        let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &xy {
            let (u, v) = (c * p.x + s * p.y, -s * p.x + c * p.y);
            u0 = u0.min(u);
            u1 = u1.max(u);
            v0 = v0.min(v);
            v1 = v1.max(v);
        }
        let cost: f64 = xy
            .iter()
            .map(|p| {
                let (u, v) = (c * p.x + s * p.y, -s * p.x + c * p.y);
                (u - u0).min(u1 - u).min(v - v0).min(v1 - v)
            })
            .sum();
        let area = (u1 - u0) * (v1 - v0);
        let better = match best {
            None => true,
            Some((bc, ba, _, _)) => cost < bc - 1e-9 * bc.max(1e-12) || (cost <= bc + 1e-9 * bc.max(1e-12) && area < ba),
        };
        if better {
            best = Some((cost, area, a, [u0, u1, v0, v1]));
        }
    }
    let (_, _, a, [u0, u1, v0, v1]) = best.expect("at least one heading");
    let (s, c) = a.sin_cos();
    let (cu, cv) = (0.5 * (u0 + u1), 0.5 * (v0 + v1));
    let (zmin, zmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)));
    Ok(OrientedBox::new(
        Point3::new(c * cu - s * cv, s * cu + c * cv, 0.5 * (zmin + zmax)),
        a,
        Vector3::new(0.5 * (u1 - u0), 0.5 * (v1 - v0), 0.5 * (zmax - zmin)),
    ))
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Box along the cluster's principal horizontal direction with extents
/// trimmed to the `[q, 1 - q]` quantiles on each axis.
pub fn fit_planar_box(points: &[Point3], trim_quantile: f64) -> Result<OrientedBox> {
    if points.len() < 3 {
        return Err(Error::Insufficient(format!(
            "planar box needs 3 points, got {}",
            points.len()
        )));
    }
    if !(0.0..=0.1).contains(&trim_quantile) {
        return Err(Error::Domain(format!("trim quantile {trim_quantile} not in [0, 0.1]")));
    }
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (mx, my) = (mx / n, my / n);
    let mut cov = Matrix2::zeros();
    for p in points {
        let d = Vector2::new(p.x - mx, p.y - my);
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let major = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let axis: Vector2<f64> = eig.eigenvectors.column(major).into();
    let yaw = canonical_yaw(axis.y.atan2(axis.x));
    let (s, c) = yaw.sin_cos();

    let mut us: Vec<f64> = points.iter().map(|p| c * p.x + s * p.y).collect();
    let mut vs: Vec<f64> = points.iter().map(|p| -s * p.x + c * p.y).collect();
    let mut zs: Vec<f64> = points.iter().map(|p| p.z).collect();
    let range = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (quantile(v, trim_quantile), quantile(v, 1.0 - trim_quantile))
    };
    let (u0, u1) = range(&mut us);
    let (v0, v1) = range(&mut vs);
    let (z0, z1) = range(&mut zs);
    let (uc, vc) = (0.5 * (u0 + u1), 0.5 * (v0 + v1));
    Ok(OrientedBox::new(
        Point3::new(c * uc - s * vc, s * uc + c * vc, 0.5 * (z0 + z1)),
        yaw,
        Vector3::new(0.5 * (u1 - u0), 0.5 * (v1 - v0), 0.5 * (z1 - z0)),
    ))
}

/// Area of the intersection of two convex counter-clockwise polygons.
pub fn convex_intersection_area(a: &[Vector2<f64>], b: &[Vector2<f64>]) -> f64 {
    let mut poly: Vec<Vector2<f64>> = a.to_vec();
    for i in 0..b.len() {
        if poly.is_empty() {
            break;
        }
        let (e0, e1) = (b[i], b[(i + 1) % b.len()]);
        let edge = e1 - e0;
        let side = |p: &Vector2<f64>| edge.perp(&(p - e0));
        let input = std::mem::take(&mut poly);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(&p), side(&q));
            if sp >= 0.0 {
                poly.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                poly.push(p + (q - p) * t);
            }
        }
    }
    polygon_area(&poly)
}

fn polygon_area(p: &[Vector2<f64>]) -> f64 {
    if p.len() < 3 {
        return 0.0;
    }
    let twice: f64 = (0..p.len()).map(|i| p[i].perp(&p[(i + 1) % p.len()])).sum();
    0.5 * twice.abs()
}

/// Intersection over union of two gravity-aligned boxes, margins ignored.
pub fn iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let z_overlap = ((a.center.z + a.half_extents.z).min(b.center.z + b.half_extents.z)
        - (a.center.z - a.half_extents.z).max(b.center.z - b.half_extents.z))
    .max(0.0);
    if z_overlap == 0.0 {
        return 0.0;
    }
    let inter = convex_intersection_area(&a.footprint(), &b.footprint()) * z_overlap;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
