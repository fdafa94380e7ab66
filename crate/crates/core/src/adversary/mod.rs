//! Receiver-side linkage attack.
//!
//! The ego vehicle links shared streams to physical vehicles in four steps:
//! nearest-neighbour tracking of forged positions ([`track_shared_frames`]),
//! ground-truth observation within sensing range ([`observe_physical`]),
//! a mean-distance cost matrix ([`build_cost_matrix`]) and an optimal
//! assignment ([`hungarian_assign`]). [`evaluate_privacy`] chains them and
//! scores the outcome; [`rollout_sweep`] repeats that over a scenario suite.

mod cost;
mod evaluate;
mod hungarian;
mod stats;
mod sweep;
mod tracker;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obfuscation::{Micros, PolicyError, Pseudonym};
use crate::scene::{SceneError, VehicleId};

pub use cost::{build_cost_matrix, CostMatrix, MIN_OVERLAP};
pub use evaluate::{
    evaluate_privacy, observe_physical, AssignmentResult, AttackParams, TrackMatch,
};
pub use hungarian::{hungarian_assign, Assignment};
pub use stats::{mean_sd, spearman_rho};
pub use sweep::{rollout_sweep, sweep_csv, SweepFamily, SweepRow, SweepSpec, SWEEP_CSV_HEADER};
pub use tracker::{track_shared_frames, track_shared_frames_indexed, Association};

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("degenerate scenario: {0}")]
    Degenerate(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub t: Micros,
    pub x: f64,
    pub y: f64,
}

impl TrackSample {
    pub fn distance(&self, other: &TrackSample) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A sharer as the adversary sees it: a chain of forged positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredTrack {
    pub track_id: u32,
    pub samples: Vec<TrackSample>,
    pub source_pseudonyms: BTreeSet<Pseudonym>,
}

/// A physical vehicle as seen by the ego's own sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedTrack {
    pub vehicle_id: VehicleId,
    pub samples: Vec<TrackSample>,
}
