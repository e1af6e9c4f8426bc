//! Synthetic street scenes, a ray-cast lidar, and evaluation metrics.

mod lidar;
mod metrics;
mod scene;

pub use lidar::{
    frame_rng, generate_sequence, reported_pose, simulate_scan, GroundTruth, SimMode, TruthBox, TruthKind, TruthLabel,
};
pub use metrics::{box_metrics, point_metrics, BoxMetrics, PointMetrics};
pub use scene::{
    ActorSpec, CuboidSpec, EgoSpec, FacadeSpec, NssoSpec, PoseNoiseSpec, RoadSpec, SceneSpec, SensorSpec,
};
