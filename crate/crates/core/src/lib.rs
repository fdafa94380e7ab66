//! Simulation library for location-privacy leakage in raw-data cooperative
//! perception.
//!
//! The crate is organised by subsystem:
//!
//! - [`scene`]: synthetic driving scenarios and trajectory import.
//! - [`obfuscation`]: forged shared poses and pseudonym management.
//! - [`adversary`]: the receiver-side linkage attack (tracking, assignment,
//!   confusion rate and RMSE) plus the multi-rollout sweep.
//! - [`nvs`]: pinhole reprojection, z-buffered depth rendering, hole
//!   measurements and cooperative depth coverage.
//! - [`scheduler`]: duty-cycled open/proprietary stack timelines.
//! - [`billing`]: per-request metering and multi-party settlement.
//! - [`wire`]: the versioned binary frame envelope and its JSON mirror.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod billing;
pub mod nvs;
pub mod obfuscation;
pub mod rng;
pub mod scene;
pub mod scheduler;
pub mod wire;

pub use adversary::{
    evaluate_privacy, hungarian_assign, rollout_sweep, AssignmentResult, CostMatrix, InferredTrack,
    ObservedTrack, SweepRow, SweepSpec,
};
pub use billing::{meter, settle, Invoice, Money, SettlementMatrix, Tariff};
pub use nvs::{CameraIntrinsics, DepthMap, RenderReport};
pub use obfuscation::{
    emit_shared_stream, ObfuscationPolicy, PayloadDescriptor, Priority, Pseudonym, PseudonymPolicy,
    SharedFrame, SharerStream, StackTag,
};
pub use scene::{Point3, PointCloud, Pose, RoadLayout, Scenario, Trajectory, VehicleId};
pub use scheduler::{build_timeline, DemandRequest, ScheduleSlot, StackConfig, Timeline};
pub use wire::{decode, encode, WireError};
