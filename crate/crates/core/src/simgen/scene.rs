use serde::{Deserialize, Serialize};

use crate::boxes::OrientedBox;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose};

/// Ground surface `z = height + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadSpec {
    pub height: f64,
    pub slope: f64,
}

impl Default for RoadSpec {
    fn default() -> Self {
        RoadSpec {
            height: 0.0,
            slope: 0.0,
        }
    }
}

/// Vertical rectangle standing on the segment `start -> end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacadeSpec {
    pub start: [f64; 2],
    pub end: [f64; 2],
    #[serde(default)]
    pub base: f64,
    pub top: f64,
}

/// Gravity-aligned cuboid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuboidSpec {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

impl CuboidSpec {
    pub fn to_box(&self) -> OrientedBox {
        OrientedBox::new(Point3::from(self.center), self.yaw, Point3::from(self.half_extents))
    }
}

/// Static object that may exist only while mapping, only while driving, or
/// both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NssoSpec {
    #[serde(flatten)]
    pub shape: CuboidSpec,
    pub in_map: bool,
    pub in_drive: bool,
}

/// Cuboid moving with constant velocity from `shape.center` at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorSpec {
    #[serde(flatten)]
    pub shape: CuboidSpec,
    pub velocity: [f64; 3],
}

impl ActorSpec {
    pub fn box_at(&self, t: f64) -> OrientedBox {
        let mut b = self.shape.to_box();
        b.center += Point3::from(self.velocity) * t;
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    /// Explicit elevations in degrees; when empty, `layers` evenly spaced
    /// angles from `layer_min_deg` to `layer_max_deg`.
    pub layer_angles_deg: Vec<f64>,
    pub layers: usize,
    pub layer_min_deg: f64,
    pub layer_max_deg: f64,
    pub azimuth_step_deg: f64,
    pub max_range: f64,
    pub range_noise: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            layer_angles_deg: Vec::new(),
            layers: 32,
            layer_min_deg: -25.0,
            layer_max_deg: 5.0,
            azimuth_step_deg: 0.2,
            max_range: 100.0,
            range_noise: 0.02,
        }
    }
}

impl SensorSpec {
    /// Layer elevations in radians, ascending.
    pub fn layer_angles(&self) -> Vec<f64> {
        if !self.layer_angles_deg.is_empty() {
            return self.layer_angles_deg.iter().map(|d| d.to_radians()).collect();
        }
        if self.layers == 1 {
            return vec![self.layer_min_deg.to_radians()];
        }
        let step = (self.layer_max_deg - self.layer_min_deg) / (self.layers - 1) as f64;
        (0..self.layers)
            .map(|i| (self.layer_min_deg + step * i as f64).to_radians())
            .collect()
    }

    pub fn azimuth_step(&self) -> f64 {
        self.azimuth_step_deg.to_radians()
    }

    pub fn n_azimuths(&self) -> usize {
        (360.0 / self.azimuth_step_deg).round() as usize
    }
}

/// Sensor trajectory: constant velocity from `start`, or an explicit pose per
/// frame (`[x, y, z, yaw, pitch, roll]`, radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgoSpec {
    pub start: [f64; 3],
    pub yaw: f64,
    pub velocity: [f64; 3],
    pub poses: Vec<[f64; 6]>,
}

impl Default for EgoSpec {
    fn default() -> Self {
        EgoSpec {
            start: [0.0, 0.0, 2.0],
            yaw: 0.0,
            velocity: [2.0, 0.0, 0.0],
            poses: Vec::new(),
        }
    }
}

/// Bounded uniform perturbation of the reported drive-mode poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseNoiseSpec {
    /// Per-axis bound, meters.
    pub translation: f64,
    /// Per-angle bound, degrees.
    pub angle_deg: f64,
}

impl Default for PoseNoiseSpec {
    fn default() -> Self {
        PoseNoiseSpec {
            translation: 0.0,
            angle_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub frame_rate: f64,
    pub frames: usize,
    pub road: Option<RoadSpec>,
    pub facades: Vec<FacadeSpec>,
    pub static_clutter: Vec<CuboidSpec>,
    pub nsso_objects: Vec<NssoSpec>,
    pub actors: Vec<ActorSpec>,
    pub sensor: SensorSpec,
    pub ego: EgoSpec,
    pub pose_noise: PoseNoiseSpec,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            frame_rate: 10.0,
            frames: 10,
            road: Some(RoadSpec::default()),
            facades: Vec::new(),
            static_clutter: Vec::new(),
            nsso_objects: Vec::new(),
            actors: Vec::new(),
            sensor: SensorSpec::default(),
            ego: EgoSpec::default(),
            pose_noise: PoseNoiseSpec::default(),
        }
    }
}

fn cuboid(center: [f64; 3], half_extents: [f64; 3], yaw: f64) -> CuboidSpec {
    CuboidSpec {
        center,
        half_extents,
        yaw,
    }
}

impl SceneSpec {
    /// A straight street: flat road, a facade on each side, three pieces of
    /// static clutter, one parked van absent while mapping, and two moving
    /// vans (one leading, one oncoming). Van bodies clear the road by 0.4 m
    /// and reach 2.4 m. The sensor rides 2 m above the road at 2 m/s.
    pub fn street() -> Self {
        let van = [2.3, 1.0, 1.0];
        SceneSpec {
            frames: 50,
            facades: vec![
                FacadeSpec { start: [-120.0, 12.0], end: [140.0, 12.0], base: 0.0, top: 9.0 },
                FacadeSpec { start: [-120.0, -12.0], end: [140.0, -12.0], base: 0.0, top: 7.0 },
            ],
            static_clutter: vec![
                cuboid([16.0, 9.0, 0.6], [0.6, 0.6, 0.6], 0.0),
                cuboid([34.0, -9.5, 1.0], [1.5, 1.0, 1.0], 0.3),
                cuboid([-8.0, 6.0, 0.5], [0.5, 0.8, 0.5], 0.0),
            ],
            nsso_objects: vec![NssoSpec {
                shape: cuboid([18.0, -8.5, 1.4], van, 0.0),
                in_map: false,
                in_drive: true,
            }],
            actors: vec![
                ActorSpec { shape: cuboid([14.0, 5.0, 1.4], van, 0.0), velocity: [2.5, 0.0, 0.0] },
                ActorSpec { shape: cuboid([40.0, -5.0, 1.4], van, 0.0), velocity: [-3.0, 0.0, 0.0] },
            ],
            pose_noise: PoseNoiseSpec { translation: 0.05, angle_deg: 0.2 },
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("scene")
                .to_string();
            Error::config(field, e.message().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::config("frame_rate", format!("must be positive, got {}", self.frame_rate)));
        }
        if self.frames == 0 && self.ego.poses.is_empty() {
            return Err(Error::config("frames", "must be at least 1"));
        }
        let s = &self.sensor;
        if !(s.range_noise >= 0.0) {
            return Err(Error::config("sensor.range_noise", "must be non-negative"));
        }
        if !(s.max_range > 0.0) {
            return Err(Error::config("sensor.max_range", "must be positive"));
        }
        if !(s.azimuth_step_deg > 0.0 && s.azimuth_step_deg <= 360.0) {
            return Err(Error::config("sensor.azimuth_step_deg", "must be in (0, 360]"));
        }
        if s.layer_angles_deg.is_empty() && (s.layers == 0 || s.layer_max_deg < s.layer_min_deg) {
            return Err(Error::config("sensor.layers", "need at least one layer and max >= min"));
        }
        let layers = s.layer_angles();
        if layers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("sensor.layer_angles_deg", "must be strictly increasing"));
        }
        if layers.iter().any(|a| a.abs() >= std::f64::consts::FRAC_PI_2) {
            return Err(Error::config("sensor.layer_angles_deg", "must be within (-90, 90)"));
        }
        let n = &self.pose_noise;
        if !(n.translation >= 0.0 && n.angle_deg >= 0.0) {
            return Err(Error::config("pose_noise", "bounds must be non-negative"));
        }
        let all_boxes = self
            .static_clutter
            .iter()
            .chain(self.nsso_objects.iter().map(|o| &o.shape))
            .chain(self.actors.iter().map(|a| &a.shape));
        for c in all_boxes {
            if c.half_extents.iter().any(|&h| !(h > 0.0)) {
                return Err(Error::config("half_extents", "must be positive"));
            }
        }
        for f in &self.facades {
            if !(f.top > f.base) || f.start == f.end {
                return Err(Error::config("facades", "need top > base and distinct endpoints"));
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        if self.ego.poses.is_empty() {
            self.frames
        } else {
            self.ego.poses.len()
        }
    }

    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 / self.frame_rate
    }

    /// True sensor pose at `frame`.
    pub fn ego_pose(&self, frame: usize) -> Pose {
        if let Some(p) = self.ego.poses.get(frame) {
            return Pose::new(Point3::new(p[0], p[1], p[2]), p[3], p[4], p[5]);
        }
        let t = self.time_of(frame);
        Pose::new(Point3::from(self.ego.start) + Point3::from(self.ego.velocity) * t, self.ego.yaw, 0.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let s = SceneSpec::street();
        assert_eq!(SceneSpec::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn negative_frame_rate_names_field() {
        match SceneSpec::from_toml("frame_rate = -1.0\n") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "frame_rate"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(SceneSpec::from_toml("bogus = 1\n"), Err(Error::Config { .. })));
    }

    #[test]
    fn default_layers() {
        let l = SensorSpec::default().layer_angles();
        assert_eq!(l.len(), 32);
        assert!((l[0] - (-25f64).to_radians()).abs() < 1e-15);
        assert!((l[31] - 5f64.to_radians()).abs() < 1e-12);
    }
}
