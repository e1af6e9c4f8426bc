//! Points, poses and coordinate conversions.
//!
//! Frames are right-handed with x forward, y left and z up. A [`Pose`] maps
//! sensor coordinates into the global map frame.

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};

/// A Cartesian point in meters.
pub type Point3 = Vector3<f64>;

pub fn is_finite(p: &Point3) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

/// Range, horizontal angle and elevation of a point as seen from the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    pub d: f64,
    /// Horizontal angle from +x, in (-pi, pi].
    pub theta: f64,
    /// Elevation above the xy plane, in [-pi/2, pi/2].
    pub phi: f64,
}

pub fn cartesian_to_spherical(p: &Point3) -> Result<SphericalPoint> {
    let d = p.norm();
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!(
            "spherical angles undefined for point ({}, {}, {})",
            p.x, p.y, p.z
        )));
    }
    let horizontal = p.x.hypot(p.y);
    let mut theta = p.y.atan2(p.x);
    if theta == -std::f64::consts::PI {
        theta = std::f64::consts::PI;
    }
    Ok(SphericalPoint {
        d,
        theta,
        phi: p.z.atan2(horizontal),
    })
}

pub fn spherical_to_cartesian(s: &SphericalPoint) -> Point3 {
    let (sp, cp) = s.phi.sin_cos();
    let (st, ct) = s.theta.sin_cos();
    Point3::new(s.d * cp * ct, s.d * cp * st, s.d * sp)
}

/// Rigid transform from the sensor frame to the global frame.
///
/// The rotation is `Rz(yaw) * Ry(pitch) * Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Point3,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            translation: Point3::zeros(),
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
        }
    }

    pub fn new(translation: Point3, yaw: f64, pitch: f64, roll: f64) -> Self {
        Pose {
            translation,
            yaw,
            pitch,
            roll,
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw).into_inner()
    }

    #[inline]
    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation() * p + self.translation
    }

    /// Precomputed form for transforming many points.
    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation(),
            translation: self.translation,
        }
    }
}

/// Rotation matrix plus translation, `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Point3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Point3::zeros(),
        }
    }

    #[inline]
    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}
