use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose, RigidTransform};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    /// Per-point reflectance in [0, 1], same length as `points` when present.
    pub intensity: Option<Vec<f64>>,
    pub frame_id: u64,
    pub timestamp: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud {
            points,
            ..Default::default()
        }
    }

    pub fn with_intensity(points: Vec<Point3>, intensity: Vec<f64>) -> Result<Self> {
        if intensity.len() != points.len() {
            return Err(Error::Domain(format!(
                "intensity length {} does not match {} points",
                intensity.len(),
                points.len()
            )));
        }
        Ok(PointCloud {
            points,
            intensity: Some(intensity),
            ..Default::default()
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy of the cloud restricted to `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            intensity: self
                .intensity
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
            frame_id: self.frame_id,
            timestamp: self.timestamp,
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            intensity: self.intensity.clone(),
            frame_id: self.frame_id,
            timestamp: self.timestamp,
        }
    }
}

/// Maps every point into the global frame with `R p + t`. Intensity and
/// frame metadata are carried over unchanged.
pub fn transform_to_global(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    cloud.transformed(&pose.to_transform())
}

/// Registered frames ordered by strictly increasing timestamp.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameSequence {
    frames: Vec<(PointCloud, Pose)>,
}

impl FrameSequence {
    pub fn new(frames: Vec<(PointCloud, Pose)>) -> Result<Self> {
        for w in frames.windows(2) {
            if !(w[1].0.timestamp > w[0].0.timestamp) {
                return Err(Error::Domain(format!(
                    "frame timestamps not strictly increasing: {} then {}",
                    w[0].0.timestamp, w[1].0.timestamp
                )));
            }
        }
        let mut ids: Vec<u64> = frames.iter().map(|(c, _)| c.frame_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("duplicate frame ids".into()));
        }
        Ok(FrameSequence { frames })
    }

    pub fn frames(&self) -> &[(PointCloud, Pose)] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<(PointCloud, Pose)> {
        self.frames
    }
}
