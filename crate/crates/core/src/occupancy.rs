//! Sparse voxel occupancy grid with clamped log-odds cells.
//!
//! Each measurement adds `L(p_meas) - L(p_prior)` to the cell's log-odds, so
//! the stored value after `n` measurements is
//! `L(prior) + sum_i (L(p_i) - L(prior))`. Untouched cells implicitly hold
//! `L(p_prior)`.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{is_finite, Point3};

/// `ln(p / (1 - p))`.
pub fn log_odds(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} not in (0, 1)")));
    }
    Ok((p / (1.0 - p)).ln())
}

/// Inverse of [`log_odds`].
pub fn prob(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    pub i: i64,
    pub j: i64,
    pub k: i64,
}

impl GridIndex {
    pub const fn new(i: i64, j: i64, k: i64) -> Self {
        GridIndex { i, j, k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupancyParams {
    pub p_prior: f64,
    pub p_free: f64,
    pub p_occupied: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub voxel_size: f64,
    pub grid_origin: [f64; 3],
    /// Rays longer than this only clear space up to `max_range`.
    pub max_range: f64,
}

impl Default for OccupancyParams {
    fn default() -> Self {
        OccupancyParams {
            p_prior: 0.5,
            p_free: 0.4,
            p_occupied: 0.7,
            l_min: -2.0,
            l_max: 3.5,
            voxel_size: 0.5,
            grid_origin: [0.0; 3],
            max_range: 100.0,
        }
    }
}

impl OccupancyParams {
    /// Same as the defaults but with clamping disabled.
    pub fn unclamped() -> Self {
        OccupancyParams {
            l_min: f64::NEG_INFINITY,
            l_max: f64::INFINITY,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |p: f64| p > 0.0 && p < 1.0;
        if !(in_unit(self.p_free) && self.p_free < 0.5) {
            return Err(Error::config("p_free", format!("{} not in (0, 0.5)", self.p_free)));
        }
        if !(in_unit(self.p_occupied) && self.p_occupied > 0.5) {
            return Err(Error::config(
                "p_occupied",
                format!("{} not in (0.5, 1)", self.p_occupied),
            ));
        }
        if !(self.p_prior > self.p_free && self.p_prior < self.p_occupied) {
            return Err(Error::config(
                "p_prior",
                format!("{} not between p_free and p_occupied", self.p_prior),
            ));
        }
        if !(self.l_min < 0.0) {
            return Err(Error::config("l_min", "must be negative"));
        }
        if !(self.l_max > 0.0) {
            return Err(Error::config("l_max", "must be positive"));
        }
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::config("voxel_size", "must be positive"));
        }
        if !self.grid_origin.iter().all(|v| v.is_finite()) {
            return Err(Error::config("grid_origin", "must be finite"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::config("max_range", "must be positive"));
        }
        Ok(())
    }

    pub fn origin(&self) -> Point3 {
        Point3::from(self.grid_origin)
    }

    pub fn cell_of(&self, p: &Point3) -> GridIndex {
        let q = (p - self.origin()) / self.voxel_size;
        GridIndex::new(q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64)
    }

    pub fn cell_center(&self, c: GridIndex) -> Point3 {
        self.origin()
            + Point3::new(c.i as f64 + 0.5, c.j as f64 + 0.5, c.k as f64 + 0.5) * self.voxel_size
    }
}

/// Voxels crossed by the segment `origin -> endpoint`, in order.
///
/// Parametric grid walk: at each step the axis (or axes, on exact ties)
/// with the nearest boundary crossing advances, so no voxel whose interior
/// the segment passes through is skipped and corner passages step
/// diagonally.
pub fn traverse_cells(origin: &Point3, endpoint: &Point3, params: &OccupancyParams) -> Vec<GridIndex> {
    const TIE: f64 = 1e-12;
    let start = params.cell_of(origin);
    let end = params.cell_of(endpoint);
    let mut out = vec![start];
    if start == end {
        return out;
    }
    let o = (origin - params.origin()) / params.voxel_size;
    let dir = (endpoint - origin) / params.voxel_size;
    let mut cell = [start.i, start.j, start.k];
    let target = [end.i, end.j, end.k];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        if dir[a] > 0.0 {
            step[a] = 1;
            t_max[a] = ((cell[a] + 1) as f64 - o[a]) / dir[a];
            t_delta[a] = 1.0 / dir[a];
        } else if dir[a] < 0.0 {
            step[a] = -1;
            t_max[a] = (cell[a] as f64 - o[a]) / dir[a];
            t_delta[a] = -1.0 / dir[a];
        }
    }
    let budget: i64 = (0..3).map(|a| (target[a] - cell[a]).abs()).sum::<i64>() + 3;
    for _ in 0..budget {
        let t = t_max[0].min(t_max[1]).min(t_max[2]);
        if t > 1.0 {
            break;
        }
        for a in 0..3 {
            if t_max[a] - t <= TIE {
                cell[a] += step[a];
                t_max[a] += t_delta[a];
            }
        }
        out.push(GridIndex::new(cell[0], cell[1], cell[2]));
        if cell == target {
            break;
        }
    }
    if *out.last().unwrap() != end {
        // Rounding left the walk one boundary short of the endpoint's cell.
        out.push(end);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanStats {
    pub rays: usize,
    pub skipped_non_finite: usize,
    pub truncated: usize,
    pub free_cells: usize,
    pub occupied_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    params: OccupancyParams,
    prior: f64,
    l_free: f64,
    l_occupied: f64,
    cells: HashMap<GridIndex, f64>,
}

impl OccupancyGrid {
    pub fn new(params: OccupancyParams) -> Result<Self> {
        params.validate()?;
        Ok(OccupancyGrid {
            prior: log_odds(params.p_prior)?,
            l_free: log_odds(params.p_free)?,
            l_occupied: log_odds(params.p_occupied)?,
            params,
            cells: HashMap::new(),
        })
    }

    pub fn params(&self) -> &OccupancyParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Log-odds of a cell, `L(p_prior)` when never updated.
    pub fn log_odds_at(&self, cell: GridIndex) -> f64 {
        self.cells.get(&cell).copied().unwrap_or(self.prior)
    }

    pub fn probability_at(&self, cell: GridIndex) -> f64 {
        prob(self.log_odds_at(cell))
    }

    /// Stored cells in index order.
    pub fn cells_sorted(&self) -> Vec<(GridIndex, f64)> {
        let mut v: Vec<_> = self.cells.iter().map(|(k, v)| (*k, *v)).collect();
        v.sort_unstable_by_key(|(k, _)| *k);
        v
    }

    fn add(&mut self, cell: GridIndex, increment: f64) {
        let (lo, hi, prior) = (self.params.l_min, self.params.l_max, self.prior);
        let l = self.cells.entry(cell).or_insert(prior);
        *l = (*l + increment).clamp(lo, hi);
    }

    /// Applies one free (`occupied == false`) or occupied measurement.
    pub fn update_cell(&mut self, cell: GridIndex, occupied: bool) {
        let meas = if occupied { self.l_occupied } else { self.l_free };
        self.add(cell, meas - self.prior);
    }

    /// Integrates one scan taken from `sensor_origin`; the cloud must be in
    /// the grid's (global) frame.
    ///
    /// Each touched cell receives exactly one update per scan: occupied if
    /// any ray ends in it, free otherwise.
    pub fn integrate_scan(&mut self, sensor_origin: &Point3, cloud: &PointCloud) -> ScanStats {
        let mut stats = ScanStats::default();
        let mut outcome: HashMap<GridIndex, bool> = HashMap::new();
        for p in &cloud.points {
            if !is_finite(p) || !is_finite(sensor_origin) {
                stats.skipped_non_finite += 1;
                continue;
            }
            stats.rays += 1;
            let ray = p - sensor_origin;
            let len = ray.norm();
            let (end, hit) = if len > self.params.max_range {
                stats.truncated += 1;
                (sensor_origin + ray * (self.params.max_range / len), false)
            } else {
                (*p, true)
            };
            let cells = traverse_cells(sensor_origin, &end, &self.params);
            let n = cells.len();
            for (idx, c) in cells.into_iter().enumerate() {
                let impacted = hit && idx + 1 == n;
                let e = outcome.entry(c).or_insert(false);
                *e |= impacted;
            }
        }
        let mut touched: Vec<_> = outcome.into_iter().collect();
        touched.sort_unstable_by_key(|(c, _)| *c);
        for (c, occ) in touched {
            if occ {
                stats.occupied_cells += 1;
            } else {
                stats.free_cells += 1;
            }
            self.update_cell(c, occ);
        }
        stats
    }

    /// Folds in a grid built from a disjoint subset of scans over the same
    /// parameters. Increments add; clamping is applied once at the end, so
    /// the result equals sequential integration only when neither input
    /// saturated.
    pub fn merge(&mut self, other: &OccupancyGrid) -> Result<()> {
        if other.params != self.params {
            return Err(Error::Domain("cannot merge grids with different parameters".into()));
        }
        for (c, l) in &other.cells {
            let inc = l - other.prior;
            let (lo, hi, prior) = (self.params.l_min, self.params.l_max, self.prior);
            let v = self.cells.entry(*c).or_insert(prior);
            *v = (*v + inc).clamp(lo, hi);
        }
        Ok(())
    }

    pub fn state(&self, cell: GridIndex, occ_threshold: f64, free_threshold: f64) -> CellState {
        occupancy_state(self, cell, occ_threshold, free_threshold)
    }

    /// `voxgrid v1` text form: a header line then `i j k L` per stored cell.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = format!(
            "voxgrid v1 {} {} {} {} {} {}\n",
            p.voxel_size, p.grid_origin[0], p.grid_origin[1], p.grid_origin[2], p.l_min, p.l_max
        );
        for (c, l) in self.cells_sorted() {
            let _ = writeln!(s, "{} {} {} {}", c.i, c.j, c.k, l);
        }
        s
    }

    /// Parses the `voxgrid v1` form. Probabilities are not part of the format
    /// and are taken from `base`.
    pub fn from_text(text: &str, base: &OccupancyParams) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse("voxgrid", 1, "empty input"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.first() != Some(&"voxgrid") {
            return Err(Error::parse("voxgrid", 1, "missing `voxgrid` header"));
        }
        if toks.get(1) != Some(&"v1") {
            return Err(Error::Version {
                kind: "voxgrid",
                found: toks.get(1).unwrap_or(&"").to_string(),
                supported: "v1",
            });
        }
        if toks.len() != 8 {
            return Err(Error::parse("voxgrid", 1, "header needs 6 numeric fields"));
        }
        let nums: Vec<f64> = toks[2..]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse("voxgrid", 1, e.to_string()))?;
        let params = OccupancyParams {
            voxel_size: nums[0],
            grid_origin: [nums[1], nums[2], nums[3]],
            l_min: nums[4],
            l_max: nums[5],
            ..*base
        };
        let mut grid = OccupancyGrid::new(params)?;
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 4 {
                return Err(Error::parse("voxgrid", i + 1, "expected `i j k L`"));
            }
            let idx = |s: &str| s.parse::<i64>().map_err(|e| Error::parse("voxgrid", i + 1, e.to_string()));
            let c = GridIndex::new(idx(t[0])?, idx(t[1])?, idx(t[2])?);
            let l: f64 = t[3].parse().map_err(|_| Error::parse("voxgrid", i + 1, "bad log-odds"))?;
            if !(l >= params.l_min && l <= params.l_max) {
                return Err(Error::parse("voxgrid", i + 1, "log-odds outside clamp bounds"));
            }
            grid.cells.insert(c, l);
        }
        Ok(grid)
    }
}

/// Occupied iff `L > occ_threshold`, free iff `L < free_threshold`.
pub fn occupancy_state(
    grid: &OccupancyGrid,
    cell: GridIndex,
    occ_threshold: f64,
    free_threshold: f64,
) -> CellState {
    debug_assert!(free_threshold <= occ_threshold);
    let l = grid.log_odds_at(cell);
    if l > occ_threshold {
        CellState::Occupied
    } else if l < free_threshold {
        CellState::Free
    } else {
        CellState::Unknown
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_params() -> OccupancyParams {
        OccupancyParams {
            voxel_size: 1.0,
            ..Default::default()
        }
    }

    /// Recursive product-form posterior with prior odds `beta`, written out
    /// independently of the log-odds path.
    fn product_form(prior: f64, measurements: &[f64]) -> f64 {
        let beta = prior / (1.0 - prior);
        let mut p = prior;
        for &m in measurements {
            p = 1.0 / (1.0 + (1.0 - m) / m * (1.0 - p) / p * beta);
        }
        p
    }

    #[test]
    fn log_odds_examples() {
        assert_eq!(log_odds(0.5).unwrap(), 0.0);
        // ln(7/3) = 0.8472978603872037 (independent evaluation)
        assert!((log_odds(0.7).unwrap() - 0.847_297_860_387_203_7).abs() < 1e-15);
        assert!((prob(log_odds(0.3).unwrap()) - 0.3).abs() < 1e-12);
        assert!(log_odds(0.0).is_err());
        assert!(log_odds(1.0).is_err());
        assert!(log_odds(f64::NAN).is_err());
    }

    #[test]
    fn single_voxel_segment() {
        let p = unit_params();
        let c = traverse_cells(&Point3::new(0.2, 0.3, 0.4), &Point3::new(0.8, 0.1, 0.9), &p);
        assert_eq!(c, vec![GridIndex::new(0, 0, 0)]);
    }

    #[test]
    fn axis_aligned_segment() {
        let p = unit_params();
        let c = traverse_cells(&Point3::new(0.5, 0.5, 0.5), &Point3::new(3.5, 0.5, 0.5), &p);
        let want: Vec<_> = (0..4).map(|i| GridIndex::new(i, 0, 0)).collect();
        assert_eq!(c, want);
    }

    #[test]
    fn diagonal_through_shared_edge_matches_sampling() {
        let p = unit_params();
        let a = Point3::new(0.5, 0.5, 0.5);
        let b = Point3::new(1.5, 1.5, 0.5);
        let mut sampled: Vec<GridIndex> = Vec::new();
        for s in 0..=10_000 {
            let c = p.cell_of(&(a + (b - a) * (s as f64 / 10_000.0)));
            if sampled.last() != Some(&c) {
                sampled.push(c);
            }
        }
        assert_eq!(traverse_cells(&a, &b, &p), sampled);
        assert_eq!(sampled, vec![GridIndex::new(0, 0, 0), GridIndex::new(1, 1, 0)]);
    }

    /// Exact enumeration: every boundary-crossing parameter on every axis,
    /// then the cell containing the midpoint of each sub-interval.
    fn crossing_oracle(a: &Point3, b: &Point3, p: &OccupancyParams) -> Vec<GridIndex> {
        let oa = (a - p.origin()) / p.voxel_size;
        let ob = (b - p.origin()) / p.voxel_size;
        let mut ts = vec![0.0, 1.0];
        for ax in 0..3 {
            let (lo, hi) = (oa[ax].min(ob[ax]), oa[ax].max(ob[ax]));
            let mut k = lo.floor() + 1.0;
            while k <= hi {
                ts.push((k - oa[ax]) / (ob[ax] - oa[ax]));
                k += 1.0;
            }
        }
        ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut out: Vec<GridIndex> = Vec::new();
        for w in ts.windows(2) {
            if w[1] - w[0] < 1e-12 {
                continue;
            }
            let c = p.cell_of(&(a + (b - a) * (0.5 * (w[0] + w[1]))));
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn traversal_matches_crossing_oracle(
            a in prop::array::uniform3(-6.0f64..6.0),
            b in prop::array::uniform3(-6.0f64..6.0),
            vs in 0.3f64..2.0,
        ) {
            let p = OccupancyParams { voxel_size: vs, grid_origin: [0.1, -0.2, 0.05], ..Default::default() };
            let (a, b) = (Point3::from(a), Point3::from(b));
            let got = traverse_cells(&a, &b, &p);
            prop_assert_eq!(&got, &crossing_oracle(&a, &b, &p));
            prop_assert_eq!(got[0], p.cell_of(&a));
            prop_assert_eq!(*got.last().unwrap(), p.cell_of(&b));
            let mut seen = got.clone();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), got.len());
            for w in got.windows(2) {
                let d = [(w[1].i - w[0].i).abs(), (w[1].j - w[0].j).abs(), (w[1].k - w[0].k).abs()];
                prop_assert!(d.iter().all(|&x| x <= 1) && d.contains(&1));
            }
        }

        #[test]
        fn log_odds_matches_product_form(
            prior in 0.45f64..0.55,
            seq in prop::collection::vec(prop::bool::ANY, 0..=20),
        ) {
            let params = OccupancyParams { p_prior: prior, ..OccupancyParams::unclamped() };
            let mut grid = OccupancyGrid::new(params).unwrap();
            let c = GridIndex::new(0, 0, 0);
            let meas: Vec<f64> = seq.iter().map(|&o| if o { params.p_occupied } else { params.p_free }).collect();
            for &o in &seq {
                grid.update_cell(c, o);
            }
            prop_assert!((grid.probability_at(c) - product_form(prior, &meas)).abs() < 1e-9);
        }

        #[test]
        fn update_order_does_not_matter(seq in prop::collection::vec(prop::bool::ANY, 1..=20), rot in 0usize..20) {
            let mut a = OccupancyGrid::new(OccupancyParams::unclamped()).unwrap();
            let mut b = a.clone();
            let c = GridIndex::new(1, 2, 3);
            for &o in &seq { a.update_cell(c, o); }
            let mut r = seq.clone();
            r.rotate_left(rot % seq.len());
            r.reverse();
            for &o in &r { b.update_cell(c, o); }
            prop_assert!((a.log_odds_at(c) - b.log_odds_at(c)).abs() < 1e-12);
        }

        #[test]
        fn single_kind_sequences_are_monotone(occupied in prop::bool::ANY, n in 1usize..40) {
            let mut g = OccupancyGrid::new(OccupancyParams::default()).unwrap();
            let c = GridIndex::new(0, 0, 0);
            let mut last = g.log_odds_at(c);
            for _ in 0..n {
                g.update_cell(c, occupied);
                let l = g.log_odds_at(c);
                if occupied { prop_assert!(l >= last) } else { prop_assert!(l <= last) }
                prop_assert!(l >= g.params().l_min && l <= g.params().l_max);
                last = l;
            }
        }
    }

    #[test]
    fn one_occupied_measurement_gives_p_occupied() {
        let mut g = OccupancyGrid::new(OccupancyParams::default()).unwrap();
        let c = GridIndex::new(0, 0, 0);
        g.update_cell(c, true);
        assert!((g.probability_at(c) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn two_occupied_measurements() {
        let mut g = OccupancyGrid::new(OccupancyParams::default()).unwrap();
        let c = GridIndex::new(0, 0, 0);
        g.update_cell(c, true);
        g.update_cell(c, true);
        let want = 1.0 / (1.0 + (0.3f64 / 0.7).powi(2));
        assert!((g.probability_at(c) - want).abs() < 1e-12);
        assert!((want - 0.8448).abs() < 1e-4);
    }

    #[test]
    fn clamping_saturates_exactly() {
        let mut g = OccupancyGrid::new(OccupancyParams::default()).unwrap();
        let c = GridIndex::new(0, 0, 0);
        for _ in 0..100 {
            g.update_cell(c, true);
        }
        assert_eq!(g.log_odds_at(c), 3.5);
    }

    #[test]
    fn states() {
        let mut g = OccupancyGrid::new(OccupancyParams::default()).unwrap();
        let (a, b, u) = (GridIndex::new(0, 0, 0), GridIndex::new(1, 0, 0), GridIndex::new(9, 9, 9));
        for _ in 0..100 {
            g.update_cell(a, true);
            g.update_cell(b, false);
        }
        assert_eq!(g.log_odds_at(b), -2.0);
        assert_eq!(g.state(u, 0.85, -0.85), CellState::Unknown);
        assert_eq!(g.state(a, 0.85, -0.85), CellState::Occupied);
        let mut h = OccupancyGrid::new(OccupancyParams { l_min: -3.5, ..Default::default() }).unwrap();
        for _ in 0..100 {
            h.update_cell(b, false);
        }
        assert_eq!(h.log_odds_at(b), -3.5);
        assert_eq!(h.state(b, 0.85, -0.85), CellState::Free);
    }

    #[test]
    fn scan_marks_free_then_hit() {
        let mut g = OccupancyGrid::new(unit_params()).unwrap();
        let cloud = PointCloud::new(vec![Point3::new(3.5, 0.5, 0.5), Point3::new(f64::NAN, 0.0, 0.0)]);
        let st = g.integrate_scan(&Point3::new(0.5, 0.5, 0.5), &cloud);
        assert_eq!(st.skipped_non_finite, 1);
        assert_eq!((st.free_cells, st.occupied_cells), (3, 1));
        for i in 0..3 {
            assert!((g.probability_at(GridIndex::new(i, 0, 0)) - 0.4).abs() < 1e-15);
        }
        assert!((g.probability_at(GridIndex::new(3, 0, 0)) - 0.7).abs() < 1e-15);
        assert_eq!(g.probability_at(GridIndex::new(0, 1, 0)), 0.5);
    }

    #[test]
    fn occupied_wins_within_a_scan() {
        let mut g = OccupancyGrid::new(unit_params()).unwrap();
        // The second ray passes through the first ray's terminal cell.
        let cloud = PointCloud::new(vec![Point3::new(2.5, 0.5, 0.5), Point3::new(4.5, 0.5, 0.5)]);
        g.integrate_scan(&Point3::new(0.5, 0.5, 0.5), &cloud);
        assert!((g.probability_at(GridIndex::new(2, 0, 0)) - 0.7).abs() < 1e-15);
        assert!((g.probability_at(GridIndex::new(3, 0, 0)) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn long_rays_only_clear_space() {
        let mut g = OccupancyGrid::new(OccupancyParams { max_range: 2.0, ..unit_params() }).unwrap();
        let st = g.integrate_scan(&Point3::new(0.5, 0.5, 0.5), &PointCloud::new(vec![Point3::new(9.5, 0.5, 0.5)]));
        assert_eq!(st.truncated, 1);
        assert_eq!(st.occupied_cells, 0);
        assert_eq!(g.probability_at(GridIndex::new(9, 0, 0)), 0.5);
        assert!(g.probability_at(GridIndex::new(2, 0, 0)) < 0.5);
    }

    #[test]
    fn merge_equals_sequential_without_saturation() {
        let params = OccupancyParams { voxel_size: 1.0, ..OccupancyParams::unclamped() };
        let s1 = PointCloud::new(vec![Point3::new(3.5, 0.5, 0.5)]);
        let s2 = PointCloud::new(vec![Point3::new(2.5, 1.5, 0.5)]);
        let o = Point3::new(0.5, 0.5, 0.5);
        let mut seq = OccupancyGrid::new(params).unwrap();
        seq.integrate_scan(&o, &s1);
        seq.integrate_scan(&o, &s2);
        let mut a = OccupancyGrid::new(params).unwrap();
        a.integrate_scan(&o, &s1);
        let mut b = OccupancyGrid::new(params).unwrap();
        b.integrate_scan(&o, &s2);
        a.merge(&b).unwrap();
        for (c, l) in seq.cells_sorted() {
            assert!((a.log_odds_at(c) - l).abs() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut g = OccupancyGrid::new(OccupancyParams { voxel_size: 0.3, grid_origin: [0.1, 0.2, -0.7], ..Default::default() }).unwrap();
        g.integrate_scan(&Point3::new(0.0, 0.0, 1.7), &PointCloud::new(vec![Point3::new(5.1, -2.3, 0.01)]));
        let back = OccupancyGrid::from_text(&g.to_text(), g.params()).unwrap();
        assert_eq!(back, g);
        assert!(matches!(
            OccupancyGrid::from_text("voxgrid v2 1 0 0 0 -2 3.5\n", g.params()),
            Err(Error::Version { .. })
        ));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(OccupancyGrid::new(OccupancyParams { p_free: 0.6, ..Default::default() }).is_err());
        assert!(OccupancyGrid::new(OccupancyParams { l_max: -1.0, ..Default::default() }).is_err());
        assert!(OccupancyGrid::new(OccupancyParams { voxel_size: 0.0, ..Default::default() }).is_err());
    }
}
