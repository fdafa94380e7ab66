//! Scenario model: poses, trajectories, static world geometry.

mod generate;
mod import;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{
    constant_velocity_trajectory, generate_scenario, sample_box_surface, sample_plane, RoadLayout,
    LANE_WIDTH, MIN_INITIAL_GAP,
};
pub use import::{import_trajectories, import_trajectories_from_path, ImportOptions};

/// Default kinematic bound on generated and imported trajectories, m/s.
pub const DEFAULT_V_MAX: f64 = 40.0;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("vehicle {vehicle}: {message} (line {line})")]
    InconsistentVehicle {
        vehicle: VehicleId,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn normalize_heading(h: f64) -> f64 {
    let wrapped = (h + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

/// Planar pose. `heading` is the yaw about the vertical axis, counter-clockwise
/// from +x, kept in `[-π, π)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            z,
            heading: normalize_heading(heading),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.heading.is_finite()
    }

    pub fn position(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }

    pub fn planar_distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Returns the pose translated by `(dx, dy)` in the world plane.
    pub fn translated(&self, dx: f64, dy: f64) -> Pose {
        Pose {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub vehicle_id: VehicleId,
    pub dt: f64,
    pub poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(vehicle_id: VehicleId, dt: f64, poses: Vec<Pose>) -> Result<Self, SceneError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SceneError::InvalidParameter(format!(
                "trajectory dt must be positive, got {dt}"
            )));
        }
        if poses.len() < 2 {
            return Err(SceneError::InvalidParameter(format!(
                "trajectory for vehicle {vehicle_id} needs at least 2 samples"
            )));
        }
        if let Some(i) = poses.iter().position(|p| !p.is_finite()) {
            return Err(SceneError::InvalidParameter(format!(
                "vehicle {vehicle_id}: non-finite pose at sample {i}"
            )));
        }
        Ok(Self {
            vehicle_id,
            dt,
            poses,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Largest planar displacement between consecutive samples.
    pub fn max_step(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| w[0].planar_distance(&w[1]))
            .fold(0.0, f64::max)
    }

    pub fn respects_speed_limit(&self, v_max: f64) -> bool {
        self.max_step() <= v_max * self.dt + 1e-9
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<Vec<f32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self {
            points,
            intensity: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Concatenates another cloud. Intensities are dropped unless both
    /// clouds carry them.
    pub fn extend_from(&mut self, other: &PointCloud) {
        match (&mut self.intensity, &other.intensity) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            _ => self.intensity = None,
        }
        self.points.extend_from_slice(&other.points);
    }

    pub fn union(&self, other: &PointCloud) -> PointCloud {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    pub duration: f64,
    pub dt: f64,
    pub trajectories: Vec<Trajectory>,
    pub ego_id: VehicleId,
    pub world: PointCloud,
    pub rng_seed: u64,
}

impl Scenario {
    /// Builds a scenario and checks the cross-trajectory invariants.
    pub fn new(
        scenario_id: impl Into<String>,
        trajectories: Vec<Trajectory>,
        ego_id: VehicleId,
        world: PointCloud,
        rng_seed: u64,
    ) -> Result<Self, SceneError> {
        let first = trajectories
            .first()
            .ok_or_else(|| SceneError::InvalidParameter("scenario has no trajectories".into()))?;
        let dt = first.dt;
        let len = first.len();
        for tr in &trajectories {
            if tr.dt != dt || tr.len() != len {
                return Err(SceneError::InvalidParameter(format!(
                    "vehicle {} does not share the scenario time grid",
                    tr.vehicle_id
                )));
            }
        }
        let mut ids: Vec<_> = trajectories.iter().map(|t| t.vehicle_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SceneError::InvalidParameter("duplicate vehicle id".into()));
        }
        if !ids.contains(&ego_id) {
            return Err(SceneError::InvalidParameter(format!(
                "ego vehicle {ego_id} is not in the scenario"
            )));
        }
        if world.points.iter().any(|p| !p.is_finite()) {
            return Err(SceneError::InvalidParameter(
                "world geometry contains non-finite points".into(),
            ));
        }
        Ok(Self {
            scenario_id: scenario_id.into(),
            duration: dt * (len - 1) as f64,
            dt,
            trajectories,
            ego_id,
            world,
            rng_seed,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.trajectories.first().map_or(0, Trajectory::len)
    }

    /// Time of sample `i`, seconds from scenario start.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn trajectory(&self, id: VehicleId) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.vehicle_id == id)
    }

    pub fn ego(&self) -> &Trajectory {
        self.trajectory(self.ego_id)
            .expect("ego presence checked at construction")
    }

    pub fn sharers(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories
            .iter()
            .filter(move |t| t.vehicle_id != self.ego_id)
    }

    pub fn vehicle_ids(&self) -> Vec<VehicleId> {
        self.trajectories.iter().map(|t| t.vehicle_id).collect()
    }

    /// Same scenario, different receiver.
    pub fn with_ego(&self, ego_id: VehicleId) -> Result<Scenario, SceneError> {
        if self.trajectory(ego_id).is_none() {
            return Err(SceneError::InvalidParameter(format!(
                "ego vehicle {ego_id} is not in the scenario"
            )));
        }
        Ok(Scenario {
            ego_id,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Scenario, serde_json::Error> {
        serde_json::from_str(s)
    }
}
