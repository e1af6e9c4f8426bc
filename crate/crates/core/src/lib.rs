//! Static prior maps from registered lidar frames, and online detection of
//! dynamic and newly-appeared static objects by rejecting mapped background.
//!
//! The mapping side ([`priormap`]) extracts the ground plane, clusters the
//! remaining points, and stores planar and volumetric boxes. The driving side
//! ([`cascade`]) removes points explained by that map with an ordered set of
//! cheap geometric tests and labels whatever survives.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boxes;
pub mod cascade;
pub mod cloud;
pub mod clustering;
pub mod error;
pub mod geometry;
pub mod ground;
pub mod io;
pub mod occupancy;
pub mod priormap;
pub mod simgen;
pub mod spatial;

pub use boxes::OrientedBox;
pub use cascade::{run_cascade, CascadeParams, Detector, ForegroundResult, ObjectLabel, RejectionCascade};
pub use cloud::{transform_to_global, FrameSequence, PointCloud};
pub use error::{Error, Result};
pub use ground::PlaneModel;
pub use occupancy::{OccupancyGrid, OccupancyParams};
pub use priormap::{build_prior_map, MappingConfig, PriorMap};
pub use geometry::{cartesian_to_spherical, spherical_to_cartesian, Point3, Pose, SphericalPoint};
