//! Mapping stage: register frames, remove the ground, cluster what is left
//! across frames, and store a box per cluster.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxes::{fit_min_volume_box, fit_planar_box, OrientedBox};
use crate::cloud::{transform_to_global, FrameSequence, PointCloud};
use crate::clustering::{
    classify_cluster, cluster_features, cluster_frame, super_cluster, voxel_downsample, ClusteringParams, FrameCluster,
    ShapeClass,
};
use crate::error::{Error, Result};
use crate::geometry::{Point3, RigidTransform};
use crate::ground::{
    build_depth_image, classify_road, compute_vdisparity, fit_plane_least_squares, fit_road_line, ransac_plane,
    DisparityModel, PlaneModel, RansacParams, RoadClass, RoadLineParams,
};
use crate::occupancy::{OccupancyGrid, OccupancyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundMode {
    /// One RANSAC plane over all registered points.
    #[default]
    Plane,
    /// Per-scan v-disparity road labelling; the stored plane is a
    /// least-squares fit to every road point.
    Vdisparity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VDisparityConfig {
    pub layer_angles_deg: Vec<f64>,
    pub azimuth_bin_deg: f64,
    pub n_bins: usize,
    pub delta_max: f64,
    pub model: DisparityModel,
    pub line: RoadLineParams,
}

impl Default for VDisparityConfig {
    fn default() -> Self {
        VDisparityConfig {
            layer_angles_deg: Vec::new(),
            azimuth_bin_deg: 0.2,
            n_bins: 60,
            delta_max: 0.25,
            model: DisparityModel::default(),
            line: RoadLineParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundConfig {
    pub mode: GroundMode,
    /// Points within this distance of the ground plane are not clustered.
    pub margin: f64,
    /// RANSAC runs on an evenly strided subset of at most this many points.
    pub max_points: usize,
    pub ransac: RansacParams,
    pub vdisparity: VDisparityConfig,
}

impl Default for GroundConfig {
    fn default() -> Self {
        GroundConfig {
            mode: GroundMode::Plane,
            margin: 0.2,
            max_points: 200_000,
            ransac: RansacParams::default(),
            vdisparity: VDisparityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub seed: u64,
    pub ground: GroundConfig,
    pub clustering: ClusteringParams,
    /// Horizontal distance from the sensor beyond which points are not
    /// clustered.
    pub max_range: f64,
    /// Voxel size for the point set the shape feature is computed on; 0 uses
    /// the raw points.
    pub feature_voxel: f64,
    pub trim_quantile: f64,
    /// Global clusters with fewer points over the whole sequence get no box.
    pub min_map_points: usize,
    pub occupancy: Option<OccupancyParams>,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            seed: 0,
            ground: GroundConfig::default(),
            clustering: ClusteringParams::default(),
            max_range: 50.0,
            feature_voxel: 0.25,
            trim_quantile: 0.02,
            min_map_points: 50,
            occupancy: None,
        }
    }
}

impl MappingConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: MappingConfig = toml::from_str(text).map_err(|e| Error::config("mapping", e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("mapping config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.ground.ransac.validate()?;
        self.clustering.validate()?;
        if !(self.ground.margin >= 0.0) {
            return Err(Error::config("ground.margin", "must be non-negative"));
        }
        if self.ground.max_points < 3 {
            return Err(Error::config("ground.max_points", "must be at least 3"));
        }
        if self.ground.mode == GroundMode::Vdisparity {
            let v = &self.ground.vdisparity;
            if v.layer_angles_deg.is_empty() {
                return Err(Error::config("ground.vdisparity.layer_angles_deg", "required in vdisparity mode"));
            }
            if !(v.azimuth_bin_deg > 0.0) || v.n_bins == 0 || !(v.delta_max > 0.0) {
                return Err(Error::config("ground.vdisparity", "bin sizes must be positive"));
            }
        }
        if !(self.max_range > 0.0) {
            return Err(Error::config("max_range", "must be positive"));
        }
        if !(self.feature_voxel >= 0.0) {
            return Err(Error::config("feature_voxel", "must be non-negative"));
        }
        if !(0.0..=0.1).contains(&self.trim_quantile) {
            return Err(Error::config("trim_quantile", "must be in [0, 0.1]"));
        }
        if let Some(o) = &self.occupancy {
            o.validate()?;
        }
        Ok(())
    }

    /// FNV-1a over the TOML form, stable across runs and platforms.
    pub fn hash(&self) -> u64 {
        self.to_toml().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

/// A mapped box and the global cluster it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapBox {
    pub source_id: u32,
    pub point_count: usize,
    /// Shape score the planar/volumetric decision was made on.
    pub shape_score: f64,
    pub bbox: OrientedBox,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriorMap {
    pub ground_planes: Vec<PlaneModel>,
    pub planar_boxes: Vec<MapBox>,
    pub volumetric_boxes: Vec<MapBox>,
    pub occupancy: Option<OccupancyGrid>,
    pub config_hash: u64,
    pub frame_count: usize,
}

fn strided(frames: &[PointCloud], max_points: usize) -> Vec<Point3> {
    let total: usize = frames.iter().map(|c| c.len()).sum();
    let stride = total.div_ceil(max_points).max(1);
    frames
        .iter()
        .flat_map(|c| c.points.iter())
        .step_by(stride)
        .copied()
        .collect()
}

fn road_mask(cloud: &PointCloud, v: &VDisparityConfig) -> Result<Vec<bool>> {
    let layers: Vec<f64> = v.layer_angles_deg.iter().map(|d| d.to_radians()).collect();
    let img = build_depth_image(cloud, &layers, v.azimuth_bin_deg.to_radians())?;
    let hist = compute_vdisparity(&img, v.n_bins, v.delta_max, v.model)?;
    let line = fit_road_line(&hist, &v.line)?;
    let cls = classify_road(&img, &line, v.model);
    Ok(cls.points.iter().map(|c| *c == RoadClass::Road).collect())
}

/// Voxel downsampling on a grid anchored at the cluster centroid and turned
/// to its principal horizontal axis, so the result moves with the cluster
/// under rigid motions about z.
fn downsample_in_cluster_frame(points: &[Point3], size: f64) -> Vec<Point3> {
    let c = points.iter().sum::<Point3>() / points.len() as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - c.x, p.y - c.y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let (s, co) = (0.5 * (2.0 * sxy).atan2(sxx - syy)).sin_cos();
    let local: Vec<Point3> = points
        .iter()
        .map(|p| {
            let d = p - c;
            Point3::new(co * d.x + s * d.y, -s * d.x + co * d.y, d.z)
        })
        .collect();
    voxel_downsample(&local, size)
        .into_iter()
        .map(|l| Point3::new(c.x + co * l.x - s * l.y, c.y + s * l.x + co * l.y, c.z + l.z))
        .collect()
}

/// Builds the prior map from frames assumed free of moving objects.
pub fn build_prior_map(frames: &FrameSequence, config: &MappingConfig) -> Result<PriorMap> {
    config.validate()?;
    if frames.is_empty() {
        return Err(Error::Insufficient("no frames to map".into()));
    }
    let global: Vec<PointCloud> = frames
        .frames()
        .par_iter()
        .map(|(c, pose)| transform_to_global(c, pose))
        .collect();

    // Ground: either one plane for everything or a per-scan road mask.
    let gc = &config.ground;
    let (plane, masks) = match gc.mode {
        GroundMode::Plane => {
            let sample = strided(&global, gc.max_points);
            let (plane, _) = ransac_plane(&sample, &gc.ransac, config.seed)?;
            let masks: Vec<Vec<bool>> = global
                .par_iter()
                .map(|g| g.points.iter().map(|p| plane.signed_distance(p).abs() <= gc.margin).collect())
                .collect();
            (plane, masks)
        }
        GroundMode::Vdisparity => {
            let masks = frames
                .frames()
                .par_iter()
                .map(|(c, _)| road_mask(c, &gc.vdisparity))
                .collect::<Result<Vec<_>>>()?;
            let road = global
                .iter()
                .zip(&masks)
                .flat_map(|(g, m)| g.points.iter().zip(m).filter(|(_, &r)| r).map(|(p, _)| p));
            let (n, d) = fit_plane_least_squares(road)
                .ok_or_else(|| Error::Insufficient("fewer than 3 road points".into()))?;
            let plane = PlaneModel::new(n, d, gc.margin).ok_or_else(|| Error::Degenerate("road plane".into()))?;
            (plane, masks)
        }
    };

    // Per-frame clustering of the off-ground points near the sensor.
    let r2 = config.max_range * config.max_range;
    let per_frame: Vec<(Vec<Point3>, Vec<Option<u32>>)> = frames
        .frames()
        .par_iter()
        .zip(global.par_iter().zip(masks.par_iter()))
        .map(|((_, pose), (g, mask))| {
            let o = pose.translation;
            let pts: Vec<Point3> = g
                .points
                .iter()
                .zip(mask)
                .filter(|(p, &ground)| !ground && (p.x - o.x).powi(2) + (p.y - o.y).powi(2) <= r2)
                .map(|(p, _)| *p)
                .collect();
            let labels = cluster_frame(&pts, &config.clustering)
                .into_iter()
                .map(|l| l.id())
                .collect();
            (pts, labels)
        })
        .collect();

    let mut frame_clusters = Vec::new();
    for ((c, _), (pts, labels)) in frames.frames().iter().zip(&per_frame) {
        let mut sums: BTreeMap<u32, (Point3, usize)> = BTreeMap::new();
        for (p, l) in pts.iter().zip(labels) {
            if let Some(id) = l {
                let e = sums.entry(*id).or_insert((Point3::zeros(), 0));
                e.0 += p;
                e.1 += 1;
            }
        }
        for (id, (s, n)) in sums {
            frame_clusters.push(FrameCluster {
                frame_id: c.frame_id,
                cluster_id: id,
                centroid: s / n as f64,
            });
        }
    }
    let ids = super_cluster(&frame_clusters, config.clustering.eps2, config.clustering.min_pts2);

    let mut members: BTreeMap<u32, Vec<Point3>> = BTreeMap::new();
    for ((c, _), (pts, labels)) in frames.frames().iter().zip(&per_frame) {
        for (p, l) in pts.iter().zip(labels) {
            if let Some(id) = l {
                members.entry(ids[&(c.frame_id, *id)]).or_default().push(*p);
            }
        }
    }

    let fitted = members
        .into_par_iter()
        .filter(|(_, pts)| pts.len() >= config.min_map_points.max(3))
        .map(|(id, pts)| {
            let sample = if config.feature_voxel > 0.0 {
                downsample_in_cluster_frame(&pts, config.feature_voxel)
            } else {
                pts.clone()
            };
            let sample = if sample.len() >= 3 { sample } else { pts.clone() };
            let feat = cluster_features(&sample, config.clustering.planarity_mode)?;
            let class = classify_cluster(feat.shape_score, config.clustering.planarity_threshold);
            // Trimming quantiles over voxel centroids weighs the surface by
            // area instead of by scan density.
            let bbox = match class {
                ShapeClass::Planar => fit_planar_box(&sample, config.trim_quantile)?,
                ShapeClass::Volumetric => fit_min_volume_box(&pts)?,
            };
            let mb = MapBox {
                source_id: id,
                point_count: pts.len(),
                shape_score: feat.shape_score,
                bbox,
            };
            Ok((class, mb))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut map = PriorMap {
        ground_planes: vec![plane],
        config_hash: config.hash(),
        frame_count: frames.len(),
        ..Default::default()
    };
    for (class, mb) in fitted {
        match class {
            ShapeClass::Planar => map.planar_boxes.push(mb),
            ShapeClass::Volumetric => map.volumetric_boxes.push(mb),
        }
    }

    if let Some(params) = &config.occupancy {
        let mut grid = OccupancyGrid::new(*params)?;
        for ((_, pose), g) in frames.frames().iter().zip(&global) {
            grid.integrate_scan(&pose.translation, g);
        }
        map.occupancy = Some(grid);
    }
    Ok(map)
}

impl PriorMap {
    /// Every box, planar first, with its list-qualified reference.
    pub fn all_boxes(&self) -> impl Iterator<Item = &MapBox> {
        self.planar_boxes.iter().chain(&self.volumetric_boxes)
    }

    /// The map with all geometry moved by `t`. Boxes stay gravity aligned,
    /// so `t` should rotate about z only.
    pub fn transformed(&self, t: &RigidTransform) -> PriorMap {
        let yaw = t.rotation[(1, 0)].atan2(t.rotation[(0, 0)]);
        let mv = |b: &MapBox| {
            let mut b = *b;
            b.bbox = OrientedBox::new(t.apply(&b.bbox.center), b.bbox.yaw + yaw, b.bbox.half_extents)
                .with_margin(b.bbox.margin);
            b
        };
        PriorMap {
            ground_planes: self
                .ground_planes
                .iter()
                .map(|p| {
                    let n = t.rotation * p.normal;
                    PlaneModel::new(n, p.offset - n.dot(&t.translation), p.inlier_threshold).expect("unit normal")
                })
                .collect(),
            planar_boxes: self.planar_boxes.iter().map(mv).collect(),
            volumetric_boxes: self.volumetric_boxes.iter().map(mv).collect(),
            occupancy: None,
            config_hash: self.config_hash,
            frame_count: self.frame_count,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("priormap v1\n");
        let _ = writeln!(s, "frames {}", self.frame_count);
        let _ = writeln!(s, "config_hash {:016x}", self.config_hash);
        let _ = writeln!(s, "planes {}", self.ground_planes.len());
        for p in &self.ground_planes {
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                p.normal.x, p.normal.y, p.normal.z, p.offset, p.inlier_threshold
            );
        }
        for (name, list) in [("planar_boxes", &self.planar_boxes), ("volumetric_boxes", &self.volumetric_boxes)] {
            let _ = writeln!(s, "{name} {}", list.len());
            for m in list {
                let b = &m.bbox;
                let _ = writeln!(
                    s,
                    "{} {} {} {} {} {} {} {} {} {} {}",
                    m.source_id,
                    m.point_count,
                    m.shape_score,
                    b.center.x,
                    b.center.y,
                    b.center.z,
                    b.yaw,
                    b.half_extents.x,
                    b.half_extents.y,
                    b.half_extents.z,
                    b.margin
                );
            }
        }
        match &self.occupancy {
            None => s.push_str("occupancy none\n"),
            Some(g) => {
                let p = g.params();
                let _ = writeln!(s, "occupancy {}", g.len());
                let _ = writeln!(s, "occupancy_params {} {} {} {}", p.p_prior, p.p_free, p.p_occupied, p.max_range);
                s.push_str(&g.to_text());
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let mut r = Reader { lines: &lines, pos: 0 };
        let header = r.next()?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.first() != Some(&"priormap") {
            return Err(Error::parse("priormap", 1, "missing `priormap` header"));
        }
        if toks.get(1) != Some(&"v1") || toks.len() != 2 {
            return Err(Error::Version {
                kind: "priormap",
                found: toks[1..].join(" "),
                supported: "v1",
            });
        }
        let mut map = PriorMap {
            frame_count: r.keyed("frames")?,
            config_hash: {
                let v = r.keyed::<String>("config_hash")?;
                u64::from_str_radix(&v, 16).map_err(|e| r.err(e.to_string()))?
            },
            ..Default::default()
        };
        let n: usize = r.keyed("planes")?;
        for _ in 0..n {
            let v = r.floats(5)?;
            let normal = Point3::new(v[0], v[1], v[2]);
            if (normal.norm() - 1.0).abs() > 1e-9 {
                return Err(r.err("plane normal is not unit length".into()));
            }
            let p = PlaneModel {
                normal,
                offset: v[3],
                inlier_threshold: v[4],
            };
            map.ground_planes.push(p);
        }
        for name in ["planar_boxes", "volumetric_boxes"] {
            let n: usize = r.keyed(name)?;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                let v = r.floats(11)?;
                let (id, count) = (v[0], v[1]);
                if id.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&id) || count.fract() != 0.0 || count < 0.0 {
                    return Err(r.err("box id and point count must be non-negative integers".into()));
                }
                let bbox = OrientedBox {
                    center: Point3::new(v[3], v[4], v[5]),
                    yaw: v[6],
                    half_extents: Point3::new(v[7], v[8], v[9]),
                    margin: v[10],
                };
                list.push(MapBox {
                    source_id: id as u32,
                    point_count: count as usize,
                    shape_score: v[2],
                    bbox,
                });
            }
            let mut seen: Vec<u32> = list.iter().map(|b| b.source_id).collect();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(r.err(format!("duplicate source id in {name}")));
            }
            if name == "planar_boxes" {
                map.planar_boxes = list;
            } else {
                map.volumetric_boxes = list;
            }
        }
        let occ = r.keyed::<String>("occupancy")?;
        if occ != "none" {
            let cells: usize = occ.parse().map_err(|_| r.err(format!("bad occupancy cell count `{occ}`")))?;
            let v = r.keyed_floats("occupancy_params", 4)?;
            let base = OccupancyParams {
                p_prior: v[0],
                p_free: v[1],
                p_occupied: v[2],
                max_range: v[3],
                ..OccupancyParams::default()
            };
            let start = r.pos;
            for _ in 0..=cells {
                r.next()?;
            }
            let body = lines[start..r.pos].join("\n");
            map.occupancy = Some(OccupancyGrid::from_text(&body, &base)?);
        }
        if r.next()? != "end" {
            return Err(r.err("expected `end`".into()));
        }
        if r.pos != lines.len() {
            return Err(r.err("trailing content after `end`".into()));
        }
        Ok(map)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

struct Reader<'a> {
    lines: &'a [&'a str],
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, message: String) -> Error {
        Error::parse("priormap", self.pos.max(1), message)
    }

    fn next(&mut self) -> Result<&str> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| Error::parse("priormap", self.pos + 1, "unexpected end of file (truncated?)"))?;
        self.pos += 1;
        Ok(line.trim())
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next()?.to_string();
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`, found `{line}`")));
        }
        let v = toks.next().ok_or_else(|| self.err(format!("`{key}` needs a value")))?;
        if toks.next().is_some() {
            return Err(self.err(format!("`{key}` takes one value")));
        }
        v.parse().map_err(|_| self.err(format!("bad value `{v}` for `{key}`")))
    }

    fn parse_floats(&self, toks: &[&str], n: usize) -> Result<Vec<f64>> {
        if toks.len() != n {
            return Err(self.err(format!("expected {n} values, found {}", toks.len())));
        }
        toks.iter()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("bad number `{t}`"))))
            .collect()
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let line = self.next()?.to_string();
        let toks: Vec<&str> = line.split_whitespace().collect();
        self.parse_floats(&toks, n)
    }

    fn keyed_floats(&mut self, key: &str, n: usize) -> Result<Vec<f64>> {
        let line = self.next()?.to_string();
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.first() != Some(&key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        self.parse_floats(&toks[1..], n)
    }
}
