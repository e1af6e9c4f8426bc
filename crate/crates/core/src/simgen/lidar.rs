use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::boxes::OrientedBox;
use crate::cloud::{FrameSequence, PointCloud};
use crate::error::Result;
use crate::geometry::{spherical_to_cartesian, Point3, Pose, SphericalPoint};
use crate::simgen::scene::SceneSpec;

/// Per-point ground-truth class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TruthLabel {
    Road,
    StaticStructure,
    Nsso,
    Dynamic,
}

impl TruthLabel {
    pub fn code(self) -> u8 {
        match self {
            TruthLabel::Road => 0,
            TruthLabel::StaticStructure => 1,
            TruthLabel::Nsso => 2,
            TruthLabel::Dynamic => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => TruthLabel::Road,
            1 => TruthLabel::StaticStructure,
            2 => TruthLabel::Nsso,
            3 => TruthLabel::Dynamic,
            _ => return None,
        })
    }

    pub fn is_foreground(self) -> bool {
        matches!(self, TruthLabel::Nsso | TruthLabel::Dynamic)
    }

    fn intensity(self) -> f64 {
        match self {
            TruthLabel::Road => 0.1,
            TruthLabel::StaticStructure => 0.4,
            TruthLabel::Nsso => 0.6,
            TruthLabel::Dynamic => 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// Actors and drive-only objects are left out.
    Map,
    Drive,
}

/// Kind of a ground-truth foreground box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthKind {
    Nsso,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthBox {
    pub kind: TruthKind,
    /// Index into the spec's actor or NSSO list.
    pub object: usize,
    pub bbox: OrientedBox,
}

#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub labels: Vec<Vec<TruthLabel>>,
    pub boxes: Vec<Vec<TruthBox>>,
    /// Noise-free sensor poses.
    pub true_poses: Vec<Pose>,
}

#[derive(Debug, Clone, Copy)]
enum Surface {
    Plane { normal: Vector3<f64>, offset: f64 },
    Facade { a: [f64; 2], b: [f64; 2], base: f64, top: f64 },
    Cuboid(OrientedBox),
}

impl Surface {
    fn hit(&self, o: &Point3, dir: &Vector3<f64>) -> Option<f64> {
        match *self {
            Surface::Plane { normal, offset } => {
                let den = normal.dot(dir);
                if den.abs() < 1e-12 {
                    return None;
                }
                let t = (offset - normal.dot(o)) / den;
                (t > 1e-9).then_some(t)
            }
            Surface::Facade { a, b, base, top } => {
                let e = [b[0] - a[0], b[1] - a[1]];
                // Normal of the vertical plane through the segment.
                let n = [-e[1], e[0]];
                let den = n[0] * dir.x + n[1] * dir.y;
                if den.abs() < 1e-12 {
                    return None;
                }
                let t = (n[0] * (a[0] - o.x) + n[1] * (a[1] - o.y)) / den;
                if t <= 1e-9 {
                    return None;
                }
                let p = o + dir * t;
                let s = ((p.x - a[0]) * e[0] + (p.y - a[1]) * e[1]) / (e[0] * e[0] + e[1] * e[1]);
                ((0.0..=1.0).contains(&s) && p.z >= base && p.z <= top).then_some(t)
            }
            Surface::Cuboid(bx) => {
                let lo = bx.to_local(o);
                let (s, c) = bx.yaw.sin_cos();
                let ld = Vector3::new(c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z);
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                for ax in 0..3 {
                    let h = bx.half_extents[ax];
                    if ld[ax].abs() < 1e-15 {
                        if lo[ax].abs() > h {
                            return None;
                        }
                        continue;
                    }
                    let a = (-h - lo[ax]) / ld[ax];
                    let b = (h - lo[ax]) / ld[ax];
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
                if t0 > t1 || t1 <= 1e-9 {
                    return None;
                }
                // A sensor inside a box sees its inner wall.
                Some(if t0 > 1e-9 { t0 } else { t1 })
            }
        }
    }
}

struct Scene {
    surfaces: Vec<(Surface, TruthLabel)>,
    boxes: Vec<TruthBox>,
}

fn build_scene(spec: &SceneSpec, mode: SimMode, t: f64) -> Scene {
    let mut surfaces = Vec::new();
    let mut boxes = Vec::new();
    if let Some(r) = spec.road {
        let n = Vector3::new(-r.slope, 0.0, 1.0);
        surfaces.push((Surface::Plane { normal: n, offset: r.height }, TruthLabel::Road));
    }
    for f in &spec.facades {
        surfaces.push((
            Surface::Facade { a: f.start, b: f.end, base: f.base, top: f.top },
            TruthLabel::StaticStructure,
        ));
    }
    for c in &spec.static_clutter {
        surfaces.push((Surface::Cuboid(c.to_box()), TruthLabel::StaticStructure));
    }
    for (i, o) in spec.nsso_objects.iter().enumerate() {
        let present = match mode {
            SimMode::Map => o.in_map,
            SimMode::Drive => o.in_drive,
        };
        if !present {
            continue;
        }
        // Objects that were mapped belong to the static background.
        let label = if o.in_map { TruthLabel::StaticStructure } else { TruthLabel::Nsso };
        let b = o.shape.to_box();
        surfaces.push((Surface::Cuboid(b), label));
        if label == TruthLabel::Nsso {
            boxes.push(TruthBox { kind: TruthKind::Nsso, object: i, bbox: b });
        }
    }
    if mode == SimMode::Drive {
        for (i, a) in spec.actors.iter().enumerate() {
            let b = a.box_at(t);
            surfaces.push((Surface::Cuboid(b), TruthLabel::Dynamic));
            boxes.push(TruthBox { kind: TruthKind::Dynamic, object: i, bbox: b });
        }
    }
    Scene { surfaces, boxes }
}

fn mix(seed: u64, frame: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ frame.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Noise stream for one frame, derived from the global seed and frame index.
pub fn frame_rng(seed: u64, frame: usize, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, frame as u64, salt))
}

/// Casts every (layer, azimuth) ray from the true pose at `frame` and
/// returns the cloud in the sensor frame with one label per point.
///
/// Range noise is Gaussian, truncated at 6 sigma.
pub fn simulate_scan(spec: &SceneSpec, frame: usize, mode: SimMode) -> (PointCloud, Vec<TruthLabel>) {
    let (cloud, labels, _) = scan_with_boxes(spec, frame, mode);
    (cloud, labels)
}

fn scan_with_boxes(spec: &SceneSpec, frame: usize, mode: SimMode) -> (PointCloud, Vec<TruthLabel>, Vec<TruthBox>) {
    let t = spec.time_of(frame);
    let pose = spec.ego_pose(frame);
    let rot = pose.rotation();
    let origin = pose.translation;
    let scene = build_scene(spec, mode, t);
    let sensor = &spec.sensor;
    let sigma = sensor.range_noise;
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
    let mut rng = frame_rng(spec.seed, frame, 1);

    let n_az = sensor.n_azimuths();
    let step = sensor.azimuth_step();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for phi in sensor.layer_angles() {
        for k in 0..n_az {
            let theta = (k as f64 - (n_az / 2) as f64) * step;
            let local = spherical_to_cartesian(&SphericalPoint { d: 1.0, theta, phi });
            let dir = rot * local;
            let mut best: Option<(f64, TruthLabel)> = None;
            for (s, label) in &scene.surfaces {
                if let Some(d) = s.hit(&origin, &dir) {
                    if best.is_none_or(|(b, _)| d < b) {
                        best = Some((d, *label));
                    }
                }
            }
            let Some((d, label)) = best else { continue };
            if d > sensor.max_range {
                continue;
            }
            let r = match &noise {
                Some(n) => loop {
                    let e: f64 = n.sample(&mut rng);
                    if e.abs() <= 6.0 * sigma {
                        break d + e;
                    }
                },
                None => d,
            };
            if r <= 0.0 || r > sensor.max_range {
                continue;
            }
            points.push(local * r);
            labels.push(label);
        }
    }
    let intensity = labels.iter().map(|l| l.intensity()).collect();
    let mut cloud = PointCloud::with_intensity(points, intensity).expect("aligned intensity");
    cloud.frame_id = frame as u64;
    cloud.timestamp = t;
    (cloud, labels, scene.boxes)
}

/// Reported pose for `frame`: the true pose, plus bounded uniform noise in
/// drive mode.
pub fn reported_pose(spec: &SceneSpec, frame: usize, mode: SimMode) -> Pose {
    let mut pose = spec.ego_pose(frame);
    let n = spec.pose_noise;
    if mode == SimMode::Drive && (n.translation > 0.0 || n.angle_deg > 0.0) {
        let mut rng = frame_rng(spec.seed, frame, 2);
        let mut u = |b: f64| if b > 0.0 { rng.random_range(-b..=b) } else { 0.0 };
        pose.translation += Vector3::new(u(n.translation), u(n.translation), u(n.translation));
        let a = n.angle_deg.to_radians();
        pose.yaw += u(a);
        pose.pitch += u(a);
        pose.roll += u(a);
    }
    pose
}

/// Simulates every frame of the spec. Frames carry the reported poses.
pub fn generate_sequence(spec: &SceneSpec, mode: SimMode) -> Result<(FrameSequence, GroundTruth)> {
    spec.validate()?;
    let n = spec.frame_count();
    let scans: Vec<_> = (0..n).into_par_iter().map(|f| scan_with_boxes(spec, f, mode)).collect();
    let mut frames = Vec::with_capacity(n);
    let mut truth = GroundTruth::default();
    for (f, (cloud, labels, boxes)) in scans.into_iter().enumerate() {
        frames.push((cloud, reported_pose(spec, f, mode)));
        truth.labels.push(labels);
        truth.boxes.push(boxes);
    }
    truth.true_poses = (0..n).map(|f| spec.ego_pose(f)).collect();
    Ok((FrameSequence::new(frames)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::scene::{ActorSpec, CuboidSpec, SensorSpec};

    fn single_ray(phi_deg: f64) -> SceneSpec {
        SceneSpec {
            frames: 1,
            sensor: SensorSpec {
                layer_angles_deg: vec![phi_deg],
                azimuth_step_deg: 360.0,
                range_noise: 0.0,
                ..Default::default()
            },
            ego: crate::simgen::scene::EgoSpec { velocity: [0.0; 3], ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn vertical_drop_hits_road() {
        let spec = single_ray(-89.999999);
        let (c, l) = simulate_scan(&spec, 0, SimMode::Drive);
        assert_eq!(l, vec![TruthLabel::Road]);
        assert!((c.points[0].norm() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn nearest_hit_wins() {
        let mut spec = single_ray(-(2.0f64 / 12.0).atan().to_degrees());
        // Azimuth 0 looks along +x; put an actor face 5 m ahead.
        spec.actors.push(ActorSpec {
            shape: CuboidSpec { center: [6.0, 0.0, 1.5], half_extents: [1.0, 1.0, 1.5], yaw: 0.0 },
            velocity: [0.0; 3],
        });
        let (c, l) = simulate_scan(&spec, 0, SimMode::Drive);
        assert_eq!(l, vec![TruthLabel::Dynamic]);
        assert!((c.points[0].x - 5.0).abs() < 1e-9);
        let (c, l) = simulate_scan(&spec, 0, SimMode::Map);
        assert_eq!(l, vec![TruthLabel::Road]);
        assert!((c.points[0].norm() - (4.0f64 + 144.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn upward_ray_misses() {
        let (c, _) = simulate_scan(&single_ray(10.0), 0, SimMode::Drive);
        assert!(c.is_empty());
    }

    #[test]
    fn actor_kinematics() {
        let mut spec = SceneSpec::street();
        spec.actors[0].velocity = [2.0, 0.0, 0.0];
        let a = &spec.actors[0];
        let d = (a.box_at(spec.time_of(1)).center - a.box_at(spec.time_of(0)).center).norm();
        assert!((d - 0.2).abs() < 1e-12);
    }

    #[test]
    fn map_mode_excludes_foreground() {
        let mut spec = SceneSpec::street();
        spec.frames = 3;
        let (_, truth) = generate_sequence(&spec, SimMode::Map).unwrap();
        for l in truth.labels.iter().flatten() {
            assert!(!l.is_foreground());
        }
        let (_, truth) = generate_sequence(&spec, SimMode::Drive).unwrap();
        let fg = truth.labels.iter().flatten().filter(|l| l.is_foreground()).count();
        assert!(fg > 0);
    }

    #[test]
    fn deterministic() {
        let mut spec = SceneSpec::street();
        spec.frames = 2;
        let (a, _) = generate_sequence(&spec, SimMode::Drive).unwrap();
        let (b, _) = generate_sequence(&spec, SimMode::Drive).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn returns_lie_on_surfaces() {
        let mut spec = SceneSpec::street();
        spec.frames = 1;
        spec.sensor.azimuth_step_deg = 1.0;
        let (frames, truth) = generate_sequence(&spec, SimMode::Drive).unwrap();
        let sigma = spec.sensor.range_noise;
        let pose = spec.ego_pose(0);
        let scene = build_scene(&spec, SimMode::Drive, 0.0);
        for (p, _) in frames.frames()[0].0.points.iter().zip(&truth.labels[0]) {
            let r = p.norm();
            assert!(r <= spec.sensor.max_range);
            let dir = pose.rotation() * (p / r);
            let d = scene
                .surfaces
                .iter()
                .filter_map(|(s, _)| s.hit(&pose.translation, &dir))
                .fold(f64::INFINITY, f64::min);
            assert!((d - r).abs() <= 6.0 * sigma + 1e-9);
        }
    }
}
