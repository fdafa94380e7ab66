//! Point-cloud reprojection into novel viewpoints.
//!
//! Geometry only: 1-pixel splats into a z-buffer, no colour. Poses rotate
//! about the vertical axis alone.

mod camera;
mod context;
mod render;

use thiserror::Error;

pub use camera::{back_project, project_point, CameraIntrinsics, Projection, NEAR_PLANE};
pub use context::{
    context_csv, cooperative_depth_gain, corridor_scene, hole_fraction_vs_context, lateral_offset,
    static_view_cloud, ContextRow, CorridorParams, CorridorScene, DepthGain, CONTEXT_CSV_HEADER,
};
pub use render::{apply_random_mask, fuse_frames, render_depth, DepthMap, RenderReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NvsError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
