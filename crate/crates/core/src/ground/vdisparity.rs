//! Depth image, per-layer disparity histogram and road-line classification.
//!
//! Rows are lidar layers (fixed elevation), columns are azimuth bins with
//! column `n_cols / 2` centered on the forward direction. A flat road seen
//! from height `h` lies at horizontal range `h / tan(-phi)` on every layer,
//! so its disparity traces an (almost) straight line over the rows.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::cartesian_to_spherical;

/// How a cell's disparity is derived from its range and angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisparityModel {
    /// `1 / (d cos(phi))`: inverse horizontal range. A flat road has the same
    /// disparity at every azimuth, so full 360 degree scans classify cleanly.
    #[default]
    HorizontalRange,
    /// `1 / (d cos(phi) cos(theta))`: inverse forward distance. Only cells in
    /// front of the sensor plane are usable.
    Forward,
}

impl DisparityModel {
    fn disparity(self, d: f64, phi: f64, theta: f64) -> Option<f64> {
        let denom = match self {
            DisparityModel::HorizontalRange => d * phi.cos(),
            DisparityModel::Forward => d * phi.cos() * theta.cos(),
        };
        (denom > 0.0).then(|| 1.0 / denom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DepthImageStats {
    pub assigned: usize,
    /// Points farther than half a layer gap from every layer.
    pub dropped_off_layer: usize,
    /// Zero or non-finite points.
    pub dropped_invalid: usize,
    /// Points that lost a cell to a nearer return.
    pub occluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub layer_angles: Vec<f64>,
    pub azimuth_bin_width: f64,
    pub n_cols: usize,
    /// Row-major radial distances; `None` is no return.
    cells: Vec<Option<f64>>,
    /// For each input point, its `(row, col)` when assigned.
    point_cells: Vec<Option<(u32, u32)>>,
    /// Per-point range, kept so labels can be computed per point.
    point_ranges: Vec<f64>,
    pub stats: DepthImageStats,
}

impl DepthImage {
    pub fn rows(&self) -> usize {
        self.layer_angles.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.n_cols + col]
    }

    /// Horizontal angle at the center of `col`.
    pub fn column_theta(&self, col: usize) -> f64 {
        (col as f64 - (self.n_cols / 2) as f64) * self.azimuth_bin_width
    }

    pub fn populated(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn point_cell(&self, i: usize) -> Option<(usize, usize)> {
        self.point_cells[i].map(|(r, c)| (r as usize, c as usize))
    }
}

/// Projects a sensor-frame cloud onto layer rows and azimuth columns. Each
/// point goes to its nearest layer, provided it is within half the gap to the
/// neighbouring layer; on collisions the nearer return is kept.
pub fn build_depth_image(cloud: &PointCloud, layer_angles: &[f64], azimuth_bin_width: f64) -> Result<DepthImage> {
    if layer_angles.is_empty() {
        return Err(Error::Domain("depth image needs at least one layer".into()));
    }
    if layer_angles.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("layer angles must be strictly increasing".into()));
    }
    if !(azimuth_bin_width > 0.0 && azimuth_bin_width <= TAU) {
        return Err(Error::Domain("azimuth bin width must be in (0, 2pi]".into()));
    }
    let n_cols = ((TAU / azimuth_bin_width).round() as usize).max(1);
    let rows = layer_angles.len();
    let center = (n_cols / 2) as i64;
    let mut img = DepthImage {
        layer_angles: layer_angles.to_vec(),
        azimuth_bin_width,
        n_cols,
        cells: vec![None; rows * n_cols],
        point_cells: vec![None; cloud.len()],
        point_ranges: vec![f64::NAN; cloud.len()],
        stats: DepthImageStats::default(),
    };
    let mut owner: Vec<Option<usize>> = vec![None; rows * n_cols];
    for (i, p) in cloud.points.iter().enumerate() {
        let Ok(s) = cartesian_to_spherical(p) else {
            img.stats.dropped_invalid += 1;
            continue;
        };
        let Some(row) = nearest_layer(layer_angles, s.phi) else {
            img.stats.dropped_off_layer += 1;
            continue;
        };
        let col = ((s.theta / azimuth_bin_width).round() as i64 + center).rem_euclid(n_cols as i64) as usize;
        img.point_cells[i] = Some((row as u32, col as u32));
        img.point_ranges[i] = s.d;
        img.stats.assigned += 1;
        let slot = row * n_cols + col;
        match img.cells[slot] {
            Some(d) if d <= s.d => img.stats.occluded += 1,
            prev => {
                if prev.is_some() {
                    img.stats.occluded += 1;
                }
                img.cells[slot] = Some(s.d);
                owner[slot] = Some(i);
            }
        }
    }
    Ok(img)
}

fn nearest_layer(layers: &[f64], phi: f64) -> Option<usize> {
    let idx = layers.partition_point(|&a| a < phi);
    let cand = [idx.checked_sub(1), (idx < layers.len()).then_some(idx)];
    let row = cand
        .into_iter()
        .flatten()
        .min_by(|&a, &b| (layers[a] - phi).abs().total_cmp(&(layers[b] - phi).abs()))?;
    if layers.len() == 1 {
        return Some(row);
    }
    let gap = if row == 0 {
        layers[1] - layers[0]
    } else if row + 1 == layers.len() {
        layers[row] - layers[row - 1]
    } else {
        (layers[row] - layers[row - 1]).min(layers[row + 1] - layers[row])
    };
    ((layers[row] - phi).abs() <= 0.5 * gap).then_some(row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VDisparityHistogram {
    pub rows: usize,
    /// `n_bins + 1` uniform edges from 0 to `delta_max`.
    pub bin_edges: Vec<f64>,
    /// Row-major `rows x n_bins`.
    pub counts: Vec<u32>,
    pub model: DisparityModel,
    /// Populated cells behind the sensor plane (forward model only).
    pub discarded_behind: usize,
    /// Populated cells with disparity above `delta_max`.
    pub discarded_range: usize,
}

impl VDisparityHistogram {
    pub fn n_bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn delta_max(&self) -> f64 {
        *self.bin_edges.last().unwrap()
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        0.5 * (self.bin_edges[bin] + self.bin_edges[bin + 1])
    }

    pub fn count(&self, row: usize, bin: usize) -> u32 {
        self.counts[row * self.n_bins() + bin]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        let n = self.n_bins();
        &self.counts[row * n..(row + 1) * n]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Bin holding `delta`, if `delta` is in `(0, delta_max]`.
    pub fn bin_of(&self, delta: f64) -> Option<usize> {
        let dm = self.delta_max();
        if !(delta > 0.0 && delta <= dm) {
            return None;
        }
        Some(((delta / self.bin_width()) as usize).min(self.n_bins() - 1))
    }

    /// Empty histogram with the given shape.
    pub fn empty(rows: usize, n_bins: usize, delta_max: f64, model: DisparityModel) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::Domain(format!("histogram needs at least 2 bins, got {n_bins}")));
        }
        if !(delta_max > 0.0 && delta_max.is_finite()) {
            return Err(Error::Domain("delta_max must be positive".into()));
        }
        let bw = delta_max / n_bins as f64;
        let mut bin_edges: Vec<f64> = (0..n_bins).map(|b| b as f64 * bw).collect();
        bin_edges.push(delta_max);
        Ok(VDisparityHistogram {
            rows,
            bin_edges,
            counts: vec![0; rows * n_bins],
            model,
            discarded_behind: 0,
            discarded_range: 0,
        })
    }
}

/// Per-row histogram of cell disparities.
pub fn compute_vdisparity(
    img: &DepthImage,
    n_bins: usize,
    delta_max: f64,
    model: DisparityModel,
) -> Result<VDisparityHistogram> {
    let mut h = VDisparityHistogram::empty(img.rows(), n_bins, delta_max, model)?;
    for row in 0..img.rows() {
        let phi = img.layer_angles[row];
        for col in 0..img.n_cols {
            let Some(d) = img.get(row, col) else { continue };
            let Some(delta) = model.disparity(d, phi, img.column_theta(col)) else {
                h.discarded_behind += 1;
                continue;
            };
            match h.bin_of(delta) {
                Some(b) => h.counts[row * n_bins + b] += 1,
                None => h.discarded_range += 1,
            }
        }
    }
    Ok(h)
}

/// `delta(row) = slope * row + intercept`, accepted within `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadLine {
    pub slope: f64,
    pub intercept: f64,
    pub tolerance: f64,
}

impl RoadLine {
    pub fn at(&self, row: usize) -> f64 {
        self.slope * row as f64 + self.intercept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadLineParams {
    /// Highest-count bins taken from each populated row.
    pub top_k_per_row: usize,
    /// Weight each selected bin by its count; `false` gives the plain fit.
    pub weighted: bool,
    /// Acceptance band half-width, in bin widths.
    pub tolerance_bins: f64,
}

impl Default for RoadLineParams {
    fn default() -> Self {
        RoadLineParams {
            top_k_per_row: 1,
            weighted: true,
            tolerance_bins: 1.5,
        }
    }
}

/// Least-squares line through the most intense bins of each row.
pub fn fit_road_line(hist: &VDisparityHistogram, params: &RoadLineParams) -> Result<RoadLine> {
    if params.top_k_per_row == 0 {
        return Err(Error::Domain("top_k_per_row must be at least 1".into()));
    }
    if !(params.tolerance_bins > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let mut samples: Vec<(f64, f64, f64)> = Vec::new();
    let mut populated_rows = 0;
    for r in 0..hist.rows {
        let row = hist.row(r);
        let mut bins: Vec<usize> = (0..row.len()).filter(|&b| row[b] > 0).collect();
        if bins.is_empty() {
            continue;
        }
        populated_rows += 1;
        bins.sort_by(|&a, &b| row[b].cmp(&row[a]).then(a.cmp(&b)));
        for &b in bins.iter().take(params.top_k_per_row) {
            let w = if params.weighted { row[b] as f64 } else { 1.0 };
            samples.push((r as f64, hist.bin_center(b), w));
        }
    }
    if populated_rows < 2 {
        return Err(Error::Insufficient(format!(
            "road line needs 2 populated rows, found {populated_rows}"
        )));
    }
    let sw: f64 = samples.iter().map(|s| s.2).sum();
    let mx = samples.iter().map(|s| s.2 * s.0).sum::<f64>() / sw;
    let my = samples.iter().map(|s| s.2 * s.1).sum::<f64>() / sw;
    let sxx: f64 = samples.iter().map(|s| s.2 * (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| s.2 * (s.0 - mx) * (s.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(RoadLine {
        slope,
        intercept: my - slope * mx,
        tolerance: params.tolerance_bins * hist.bin_width(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoadClass {
    Road,
    PositiveObstacle,
    NegativeObstacle,
    /// Empty cell, or a return whose disparity is undefined.
    NoReturn,
}

impl RoadClass {
    pub fn code(self) -> i64 {
        match self {
            RoadClass::NoReturn => 0,
            RoadClass::Road => 1,
            RoadClass::PositiveObstacle => 2,
            RoadClass::NegativeObstacle => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadClassification {
    pub n_cols: usize,
    /// Row-major labels, one per depth-image cell.
    pub cells: Vec<RoadClass>,
    /// One label per input point, from the point's own range.
    pub points: Vec<RoadClass>,
}

fn label(delta: Option<f64>, line: &RoadLine, row: usize) -> RoadClass {
    let Some(delta) = delta else {
        return RoadClass::NoReturn;
    };
    let expected = line.at(row);
    if (delta - expected).abs() <= line.tolerance {
        RoadClass::Road
    } else if delta > expected {
        RoadClass::PositiveObstacle
    } else {
        RoadClass::NegativeObstacle
    }
}

/// Labels cells and their source points against the road line: within the
/// tolerance band is road, above it (nearer than road) is a positive
/// obstacle, below it (farther, a hole) a negative obstacle.
pub fn classify_road(img: &DepthImage, line: &RoadLine, model: DisparityModel) -> RoadClassification {
    let mut cells = vec![RoadClass::NoReturn; img.rows() * img.n_cols];
    for row in 0..img.rows() {
        let phi = img.layer_angles[row];
        for col in 0..img.n_cols {
            if let Some(d) = img.get(row, col) {
                cells[row * img.n_cols + col] = label(model.disparity(d, phi, img.column_theta(col)), line, row);
            }
        }
    }
    let points = (0..img.point_cells.len())
        .map(|i| match img.point_cell(i) {
            None => RoadClass::NoReturn,
            Some((row, col)) => label(
                model.disparity(img.point_ranges[i], img.layer_angles[row], img.column_theta(col)),
                line,
                row,
            ),
        })
        .collect();
    RoadClassification {
        n_cols: img.n_cols,
        cells,
        points,
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{spherical_to_cartesian, Point3, SphericalPoint};

    fn layers() -> Vec<f64> {
        (0..8).map(|i| (-14.0 + 2.0 * i as f64).to_radians()).collect()
    }

    fn at(d: f64, theta: f64, phi: f64) -> Point3 {
        spherical_to_cartesian(&SphericalPoint { d, theta, phi })
    }

    #[test]
    fn single_point_lands_in_center_column() {
        let l = layers();
        let img = build_depth_image(&PointCloud::new(vec![at(10.0, 0.0, l[0])]), &l, 0.01).unwrap();
        assert!((img.get(0, img.n_cols / 2).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(img.populated(), 1);
    }

    #[test]
    fn nearest_return_wins() {
        let l = layers();
        let c = PointCloud::new(vec![at(10.0, 0.0, l[3]), at(8.0, 0.001, l[3])]);
        let img = build_depth_image(&c, &l, 0.01).unwrap();
        assert!((img.get(3, img.n_cols / 2).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(img.stats.occluded, 1);
    }

    #[test]
    fn empty_cloud_gives_empty_image_and_histogram() {
        let img = build_depth_image(&PointCloud::default(), &layers(), 0.01).unwrap();
        assert_eq!(img.populated(), 0);
        let h = compute_vdisparity(&img, 16, 0.5, DisparityModel::Forward).unwrap();
        assert_eq!(h.total(), 0);
    }

    #[test]
    fn off_layer_points_dropped() {
        let l = layers();
        let c = PointCloud::new(vec![at(5.0, 0.0, l[7] + 1.5f64.to_radians()), at(5.0, 0.0, l[2] + 0.5f64.to_radians())]);
        let img = build_depth_image(&c, &l, 0.01).unwrap();
        assert_eq!(img.stats.dropped_off_layer, 1);
        assert_eq!(img.stats.assigned, 1);
    }

    #[test]
    fn disparity_examples() {
        assert!((DisparityModel::Forward.disparity(10.0, 0.0, 0.0).unwrap() - 0.1).abs() < 1e-15);
        let d = DisparityModel::Forward.disparity(20.0, 10f64.to_radians(), 0.0).unwrap();
        // 1 / (20 cos 10deg) = 0.05077133059...
        assert!((d - 0.050_771_330_594).abs() < 1e-9);
        assert!(DisparityModel::Forward.disparity(5.0, 0.0, 2.0).is_none());
        assert!(DisparityModel::HorizontalRange.disparity(5.0, 0.0, 2.0).is_some());
    }

    #[test]
    fn histogram_counts_bounded_by_cells() {
        let l = layers();
        let pts: Vec<Point3> = (0..200).map(|i| at(3.0 + (i % 17) as f64, -3.0 + 0.03 * i as f64, l[i % 8])).collect();
        let img = build_depth_image(&PointCloud::new(pts), &l, 0.01).unwrap();
        let h = compute_vdisparity(&img, 32, 0.3, DisparityModel::Forward).unwrap();
        assert!(h.total() as usize + h.discarded_behind + h.discarded_range == img.populated());
        assert!(h.discarded_behind > 0);
    }

    #[test]
    fn exact_line_recovery() {
        let mut h = VDisparityHistogram::empty(10, 200, 1.0, DisparityModel::HorizontalRange).unwrap();
        for r in 0..10 {
            let b = h.bin_of(0.01 * r as f64 + 0.02).unwrap();
            h.counts[r * 200 + b] = 5;
        }
        let line = fit_road_line(&h, &RoadLineParams::default()).unwrap();
        let half = h.bin_width() / 2.0;
        assert!((line.slope - 0.01).abs() < half);
        assert!((line.intercept - 0.02).abs() < half);
    }

    #[test]
    fn single_row_is_underdetermined() {
        let mut h = VDisparityHistogram::empty(4, 10, 1.0, DisparityModel::HorizontalRange).unwrap();
        h.counts[3] = 7;
        assert!(matches!(fit_road_line(&h, &RoadLineParams::default()), Err(Error::Insufficient(_))));
    }

    #[test]
    fn labels_relative_to_line() {
        let line = RoadLine { slope: 0.0, intercept: 0.1, tolerance: 0.01 };
        assert_eq!(label(Some(0.1), &line, 3), RoadClass::Road);
        assert_eq!(label(Some(0.12), &line, 3), RoadClass::PositiveObstacle);
        assert_eq!(label(Some(0.08), &line, 3), RoadClass::NegativeObstacle);
        assert_eq!(label(None, &line, 3), RoadClass::NoReturn);
    }
}
