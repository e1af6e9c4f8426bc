//! Driving stage: reject points explained by the prior map with an ordered
//! set of plane and box tests, cluster the survivors, and label each cluster
//! as dynamic, newly static (NSSO) or unknown from its recent motion.

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boxes::{fit_lshape_box, OrientedBox};
use crate::cloud::{transform_to_global, PointCloud};
use crate::clustering::{cluster_frame, ClusteringParams};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose};
use crate::ground::PlaneModel;
use crate::priormap::PriorMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StageKind {
    GroundPlane,
    PlanarBox,
    VolumetricBox,
}

/// A prior-map model: a ground plane by index, or a box by source id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelRef {
    Plane(usize),
    PlanarBox(u32),
    VolumetricBox(u32),
}

impl ModelRef {
    pub fn kind(self) -> StageKind {
        match self {
            ModelRef::Plane(_) => StageKind::GroundPlane,
            ModelRef::PlanarBox(_) => StageKind::PlanarBox,
            ModelRef::VolumetricBox(_) => StageKind::VolumetricBox,
        }
    }

    /// `plane:0`, `planar:3`, `volumetric:7`.
    pub fn label(self) -> String {
        match self {
            ModelRef::Plane(i) => format!("plane:{i}"),
            ModelRef::PlanarBox(i) => format!("planar:{i}"),
            ModelRef::VolumetricBox(i) => format!("volumetric:{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeStage {
    /// Stable position in the map's default order; breaks ordering ties.
    pub id: usize,
    pub model: ModelRef,
    pub margin: f64,
    /// Seconds (or analytic units) per tested point.
    pub measured_cost: Option<f64>,
    /// Fraction of calibration points this stage rejects on its own.
    pub measured_rejection: Option<f64>,
}

impl CascadeStage {
    pub fn kind(&self) -> StageKind {
        self.model.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RejectionCascade {
    stages: Vec<CascadeStage>,
}

impl RejectionCascade {
    pub fn new(stages: Vec<CascadeStage>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &stages {
            if !seen.insert(s.model) {
                return Err(Error::Domain(format!("model {} referenced twice", s.model.label())));
            }
            if !(s.margin >= 0.0) {
                return Err(Error::Domain(format!("stage {} margin {} is negative", s.id, s.margin)));
            }
            if let Some(r) = s.measured_rejection {
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::Domain(format!("stage {} rejection {r} outside [0, 1]", s.id)));
                }
            }
            if let Some(c) = s.measured_cost {
                if !(c >= 0.0) {
                    return Err(Error::Domain(format!("stage {} cost {c} is negative", s.id)));
                }
            }
        }
        Ok(RejectionCascade { stages })
    }

    /// One stage per map model: ground planes, then planar boxes, then
    /// volumetric boxes, each list in map order.
    pub fn default_stages(map: &PriorMap, ground_margin: f64, box_margin: f64) -> Vec<CascadeStage> {
        let models = (0..map.ground_planes.len())
            .map(|i| (ModelRef::Plane(i), ground_margin))
            .chain(map.planar_boxes.iter().map(|b| (ModelRef::PlanarBox(b.source_id), box_margin)))
            .chain(
                map.volumetric_boxes
                    .iter()
                    .map(|b| (ModelRef::VolumetricBox(b.source_id), box_margin)),
            );
        models
            .enumerate()
            .map(|(id, (model, margin))| CascadeStage {
                id,
                model,
                margin,
                measured_cost: None,
                measured_rejection: None,
            })
            .collect()
    }

    pub fn from_map(map: &PriorMap, ground_margin: f64, box_margin: f64) -> Result<Self> {
        Self::new(Self::default_stages(map, ground_margin, box_margin))
    }

    pub fn stages(&self) -> &[CascadeStage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// Sorts stages by descending rejection per unit cost, then lower cost, then
/// id. Stages without statistics follow, ground before planar before
/// volumetric, by id.
pub fn order_stages(mut stages: Vec<CascadeStage>) -> Result<RejectionCascade> {
    let score = |s: &CascadeStage| match (s.measured_rejection, s.measured_cost) {
        (Some(r), Some(c)) => Some((if c > 0.0 { r / c } else { f64::INFINITY }, c)),
        _ => None,
    };
    stages.sort_by(|a, b| match (score(a), score(b)) {
        (Some((ra, ca)), Some((rb, cb))) => rb.total_cmp(&ra).then(ca.total_cmp(&cb)).then(a.id.cmp(&b.id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.kind().cmp(&b.kind()).then(a.id.cmp(&b.id)),
    });
    RejectionCascade::new(stages)
}

enum Resolved<'a> {
    Plane(&'a PlaneModel, f64),
    Box {
        bbox: &'a OrientedBox,
        margin: f64,
        reach2: f64,
    },
}

impl Resolved<'_> {
    #[inline]
    fn rejects(&self, p: &Point3) -> bool {
        match *self {
            Resolved::Plane(plane, margin) => plane.signed_distance(p).abs() <= margin,
            Resolved::Box { bbox, margin, reach2 } => {
                (p - bbox.center).norm_squared() <= reach2 && bbox.contains_with(p, margin)
            }
        }
    }
}

fn resolve<'a>(map: &'a PriorMap, stage: &CascadeStage) -> Result<Resolved<'a>> {
    let dangling = || Error::DanglingReference(stage.model.label());
    let boxed = |b: &'a OrientedBox| {
        let margin = b.margin + stage.margin;
        let reach = b.half_extents.add_scalar(margin).norm();
        Resolved::Box {
            bbox: b,
            margin,
            reach2: reach * reach,
        }
    };
    Ok(match stage.model {
        ModelRef::Plane(i) => Resolved::Plane(map.ground_planes.get(i).ok_or_else(dangling)?, stage.margin),
        ModelRef::PlanarBox(id) => boxed(
            &map.planar_boxes
                .iter()
                .find(|b| b.source_id == id)
                .ok_or_else(dangling)?
                .bbox,
        ),
        ModelRef::VolumetricBox(id) => boxed(
            &map.volumetric_boxes
                .iter()
                .find(|b| b.source_id == id)
                .ok_or_else(dangling)?
                .bbox,
        ),
    })
}

/// Splits point indices into those the stage rejects and those that
/// survive, both ascending. Points are in the map frame.
pub fn apply_stage(points: &[Point3], stage: &CascadeStage, map: &PriorMap) -> Result<(Vec<usize>, Vec<usize>)> {
    let model = resolve(map, stage)?;
    Ok((0..points.len()).partition(|&i| model.rejects(&points[i])))
}

/// Analytic per-point cost of a stage's test: a plane is one dot product,
/// a box a sphere check plus a rotation and three comparisons.
pub fn analytic_cost(kind: StageKind) -> f64 {
    match kind {
        StageKind::GroundPlane => 1.0,
        StageKind::PlanarBox | StageKind::VolumetricBox => 1.5,
    }
}

/// Fills in each stage's stand-alone rejection fraction over `frames`, and
/// its cost: measured wall time per point when `measure_time`, else
/// [`analytic_cost`].
pub fn calibrate_stages(
    stages: &[CascadeStage],
    map: &PriorMap,
    frames: &[(PointCloud, Pose)],
    measure_time: bool,
) -> Result<Vec<CascadeStage>> {
    let global: Vec<Vec<Point3>> = frames.iter().map(|(c, p)| transform_to_global(c, p).points).collect();
    let total: usize = global.iter().map(Vec::len).sum();
    stages
        .iter()
        .map(|s| {
            let model = resolve(map, s)?;
            let start = Instant::now();
            let rejected: usize = global
                .iter()
                .map(|pts| pts.iter().filter(|p| model.rejects(p)).count())
                .sum();
            let elapsed = start.elapsed().as_secs_f64();
            let mut s = *s;
            s.measured_rejection = Some(if total == 0 { 0.0 } else { rejected as f64 / total as f64 });
            s.measured_cost = Some(if measure_time && total > 0 {
                elapsed / total as f64
            } else {
                analytic_cost(s.kind())
            });
            Ok(s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeParams {
    pub ground_margin: f64,
    pub box_margin: f64,
    pub clustering: ClusteringParams,
    /// Survivors farther than this horizontally from the sensor are not
    /// clustered.
    pub max_range: f64,
    /// Track window length W, frames.
    pub window: usize,
    /// Tracks seen in fewer frames of the window are Unknown.
    pub min_window: usize,
    pub motion_threshold: f64,
    /// Largest centroid jump, meters, that continues a track.
    pub track_gate: f64,
    /// A mapped volumetric box is vacated when at most this many points hit
    /// it over a full window while it is in range.
    pub vacated_max_points: usize,
}

impl Default for CascadeParams {
    fn default() -> Self {
        CascadeParams {
            ground_margin: 0.3,
            box_margin: 0.2,
            clustering: ClusteringParams::default(),
            max_range: 40.0,
            window: 10,
            min_window: 5,
            motion_threshold: 0.3,
            track_gate: 1.5,
            vacated_max_points: 0,
        }
    }
}

impl CascadeParams {
    pub fn validate(&self) -> Result<()> {
        self.clustering.validate()?;
        if !(self.ground_margin >= 0.0) {
            return Err(Error::config("ground_margin", "must be non-negative"));
        }
        if !(self.box_margin >= 0.0) {
            return Err(Error::config("box_margin", "must be non-negative"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::config("max_range", "must be positive"));
        }
        if self.window == 0 {
            return Err(Error::config("window", "must be at least 1"));
        }
        if self.min_window == 0 || self.min_window > self.window {
            return Err(Error::config("min_window", "must be in [1, window]"));
        }
        if !(self.motion_threshold > 0.0) {
            return Err(Error::config("motion_threshold", "must be positive"));
        }
        if !(self.track_gate > 0.0) {
            return Err(Error::config("track_gate", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectLabel {
    Unknown,
    Nsso,
    Dynamic,
}

impl ObjectLabel {
    pub fn name(self) -> &'static str {
        match self {
            ObjectLabel::Unknown => "unknown",
            ObjectLabel::Nsso => "nsso",
            ObjectLabel::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundCluster {
    /// Indices into the input frame.
    pub points: Vec<usize>,
    /// Map frame.
    pub centroid: Point3,
    pub bbox: OrientedBox,
    pub track_id: Option<u64>,
    pub label: ObjectLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundResult {
    pub frame_id: u64,
    pub input_points: usize,
    /// Ascending indices of points no stage rejected.
    pub survivors: Vec<usize>,
    /// Per point: cascade position of the rejecting stage, or -1.
    pub rejected_by: Vec<i32>,
    /// Per cascade position.
    pub stage_rejected: Vec<usize>,
    pub clusters: Vec<ForegroundCluster>,
}

impl ForegroundResult {
    /// Per point: 0 background, 1 unclustered survivor, then 2 unknown,
    /// 3 NSSO, 4 dynamic.
    pub fn point_labels(&self) -> Vec<i64> {
        let mut out: Vec<i64> = self.rejected_by.iter().map(|&s| if s >= 0 { 0 } else { 1 }).collect();
        for c in &self.clusters {
            let code = match c.label {
                ObjectLabel::Unknown => 2,
                ObjectLabel::Nsso => 3,
                ObjectLabel::Dynamic => 4,
            };
            for &i in &c.points {
                out[i] = code;
            }
        }
        out
    }

    /// Per point: survived the cascade.
    pub fn foreground_mask(&self) -> Vec<bool> {
        self.rejected_by.iter().map(|&s| s < 0).collect()
    }
}

/// Moves `frame` to the map frame with `pose`, runs the stages in order,
/// clusters the survivors within range and fits a box to each cluster.
/// Clusters come back Unknown; labelling needs a [`TrackWindow`].
pub fn run_cascade(
    frame: &PointCloud,
    pose: &Pose,
    map: &PriorMap,
    cascade: &RejectionCascade,
    params: &CascadeParams,
) -> Result<ForegroundResult> {
    let global = transform_to_global(frame, pose).points;
    let models = cascade
        .stages()
        .iter()
        .map(|s| resolve(map, s))
        .collect::<Result<Vec<_>>>()?;
    let mut rejected_by = vec![-1i32; global.len()];
    let mut stage_rejected = vec![0usize; models.len()];
    let mut survivors: Vec<usize> = (0..global.len()).collect();
    for (k, model) in models.iter().enumerate() {
        survivors.retain(|&i| {
            if model.rejects(&global[i]) {
                rejected_by[i] = k as i32;
                false
            } else {
                true
            }
        });
        stage_rejected[k] = global.len() - survivors.len() - stage_rejected[..k].iter().sum::<usize>();
    }

    let o = pose.translation;
    let r2 = params.max_range * params.max_range;
    let near: Vec<usize> = survivors
        .iter()
        .copied()
        .filter(|&i| (global[i].x - o.x).powi(2) + (global[i].y - o.y).powi(2) <= r2)
        .collect();
    let near_pts: Vec<Point3> = near.iter().map(|&i| global[i]).collect();
    let labels = cluster_frame(&near_pts, &params.clustering);
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (j, l) in labels.iter().enumerate() {
        if let Some(id) = l.id() {
            members.entry(id).or_default().push(j);
        }
    }
    let clusters = members
        .into_values()
        .map(|js| {
            let pts: Vec<Point3> = js.iter().map(|&j| near_pts[j]).collect();
            let centroid = pts.iter().sum::<Point3>() / pts.len() as f64;
            Ok(ForegroundCluster {
                points: js.iter().map(|&j| near[j]).collect(),
                centroid,
                bbox: fit_lshape_box(&pts)?,
                track_id: None,
                label: ObjectLabel::Unknown,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ForegroundResult {
        frame_id: frame.frame_id,
        input_points: global.len(),
        survivors,
        rejected_by,
        stage_rejected,
        clusters,
    })
}

/// Recent centroids of each foreground track, keyed by track id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackWindow {
    pub window: usize,
    pub tracks: BTreeMap<u64, VecDeque<(u64, Point3)>>,
    next_id: u64,
}

impl TrackWindow {
    pub fn new(window: usize) -> Self {
        TrackWindow {
            window,
            tracks: BTreeMap::new(),
            next_id: 0,
        }
    }

    /// Associates this frame's centroids with live tracks (greedy, closest
    /// pairs first, within `gate`), starts tracks for the rest, and drops
    /// observations older than the window. Returns one track id per
    /// centroid.
    pub fn update(&mut self, frame_id: u64, centroids: &[Point3], gate: f64) -> Vec<u64> {
        let oldest = frame_id.saturating_sub(self.window as u64 - 1);
        for obs in self.tracks.values_mut() {
            while obs.front().is_some_and(|(f, _)| *f < oldest) {
                obs.pop_front();
            }
        }
        self.tracks.retain(|_, obs| !obs.is_empty());

        let mut pairs = Vec::new();
        for (&tid, obs) in &self.tracks {
            let last = obs.back().expect("non-empty track").1;
            for (j, c) in centroids.iter().enumerate() {
                let d = (c - last).norm();
                if d <= gate {
                    pairs.push((d, tid, j));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut assigned: Vec<Option<u64>> = vec![None; centroids.len()];
        let mut taken = std::collections::BTreeSet::new();
        for (_, tid, j) in pairs {
            if assigned[j].is_none() && !taken.contains(&tid) {
                assigned[j] = Some(tid);
                taken.insert(tid);
            }
        }
        assigned
            .into_iter()
            .zip(centroids)
            .map(|(a, c)| {
                let tid = a.unwrap_or_else(|| {
                    self.next_id += 1;
                    self.next_id - 1
                });
                self.tracks.entry(tid).or_default().push_back((frame_id, *c));
                tid
            })
            .collect()
    }
}

/// Labels every track: Unknown below `min_window` observations, NSSO when
/// its centroids all lie within `motion_threshold` of each other, Dynamic
/// otherwise.
pub fn classify_survivors(window: &TrackWindow, min_window: usize, motion_threshold: f64) -> BTreeMap<u64, ObjectLabel> {
    window
        .tracks
        .iter()
        .map(|(&tid, obs)| {
            let label = if obs.len() < min_window {
                ObjectLabel::Unknown
            } else {
                let spread = obs
                    .iter()
                    .enumerate()
                    .flat_map(|(i, a)| obs.iter().skip(i + 1).map(move |b| (a.1 - b.1).norm()))
                    .fold(0.0, f64::max);
                if spread < motion_threshold {
                    ObjectLabel::Nsso
                } else {
                    ObjectLabel::Dynamic
                }
            };
            (tid, label)
        })
        .collect()
}

/// A mapped volumetric box that stayed in range with (almost) no points
/// over a full window: the object was removed since mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacatedMapRegion {
    pub source_id: u32,
    pub support: usize,
}

/// Detection state for one stream of frames.
#[derive(Debug, Clone)]
pub struct Detector {
    pub map: PriorMap,
    pub cascade: RejectionCascade,
    pub params: CascadeParams,
    pub tracks: TrackWindow,
    /// Per volumetric source id: recent (frame, in range, points inside).
    support: BTreeMap<u32, VecDeque<(u64, bool, usize)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub result: ForegroundResult,
    pub vacated: Vec<VacatedMapRegion>,
}

impl Detector {
    pub fn new(map: PriorMap, cascade: RejectionCascade, params: CascadeParams) -> Result<Self> {
        params.validate()?;
        for s in cascade.stages() {
            resolve(&map, s)?;
        }
        Ok(Detector {
            tracks: TrackWindow::new(params.window),
            map,
            cascade,
            params,
            support: BTreeMap::new(),
        })
    }

    pub fn process(&mut self, frame: &PointCloud, pose: &Pose) -> Result<Detection> {
        let mut result = run_cascade(frame, pose, &self.map, &self.cascade, &self.params)?;
        // Box centres move less than point means when the visible faces
        // change with the viewpoint.
        let centers: Vec<Point3> = result.clusters.iter().map(|c| c.bbox.center).collect();
        let ids = self.tracks.update(result.frame_id, &centers, self.params.track_gate);
        let labels = classify_survivors(&self.tracks, self.params.min_window, self.params.motion_threshold);
        for (c, id) in result.clusters.iter_mut().zip(ids) {
            c.track_id = Some(id);
            c.label = labels[&id];
        }
        let vacated = self.update_support(&result, pose);
        Ok(Detection { result, vacated })
    }

    fn update_support(&mut self, result: &ForegroundResult, pose: &Pose) -> Vec<VacatedMapRegion> {
        let w = self.params.window;
        let o = pose.translation;
        let mut out = Vec::new();
        for (k, s) in self.cascade.stages().iter().enumerate() {
            let ModelRef::VolumetricBox(id) = s.model else { continue };
            let Some(b) = self.map.volumetric_boxes.iter().find(|b| b.source_id == id) else { continue };
            let c = b.bbox.center;
            let in_range = (c.x - o.x).powi(2) + (c.y - o.y).powi(2) <= self.params.max_range.powi(2);
            let hist = self.support.entry(id).or_default();
            hist.push_back((result.frame_id, in_range, result.stage_rejected[k]));
            while hist.len() > w {
                hist.pop_front();
            }
            if hist.len() == w && hist.iter().all(|h| h.1) {
                let support = hist.iter().map(|h| h.2).sum();
                if support <= self.params.vacated_max_points {
                    out.push(VacatedMapRegion { source_id: id, support });
                }
            }
        }
        out
    }
}
