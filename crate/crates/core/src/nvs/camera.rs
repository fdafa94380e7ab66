use serde::{Deserialize, Serialize};

use super::NvsError;
use crate::scene::{Point3, Pose};

/// Points at or closer than this camera-frame depth are culled.
pub const NEAR_PLANE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, NvsError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        match k.violations().as_slice() {
            [] => Ok(k),
            v => Err(NvsError::InvalidIntrinsics(v.join("; "))),
        }
    }

    /// Principal point at the image centre.
    pub fn centered(f: f64, width: u32, height: u32) -> Result<Self, NvsError> {
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.fx > 0.0 && self.fx.is_finite() && self.fy > 0.0 && self.fy.is_finite()) {
            out.push(format!(
                "CameraIntrinsics: fx, fy must be positive (got {}, {})",
                self.fx, self.fy
            ));
        }
        if self.width == 0 || self.height == 0 {
            out.push("CameraIntrinsics: width and height must be non-zero".into());
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            out.push(format!(
                "CameraIntrinsics: cx {} outside [0, {})",
                self.cx, self.width
            ));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            out.push(format!(
                "CameraIntrinsics: cy {} outside [0, {})",
                self.cy, self.height
            ));
        }
        out
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Camera-frame z, metres.
    pub depth: f64,
}

impl Projection {
    /// Row-major index of the pixel containing `(u, v)`.
    pub fn pixel(&self, k: &CameraIntrinsics) -> usize {
        self.v as usize * k.width as usize + self.u as usize
    }
}

// Camera frame: z along the heading, x to the right of it, y down.
fn world_to_camera(pose: &Pose, p: &Point3) -> (f64, f64, f64) {
    let (s, c) = pose.heading.sin_cos();
    let (dx, dy, dz) = (p.x - pose.x, p.y - pose.y, p.z - pose.z);
    (s * dx - c * dy, -dz, c * dx + s * dy)
}

fn camera_to_world(pose: &Pose, xc: f64, yc: f64, zc: f64) -> Point3 {
    let (s, c) = pose.heading.sin_cos();
    Point3::new(
        pose.x + s * xc + c * zc,
        pose.y - c * xc + s * zc,
        pose.z - yc,
    )
}

/// Projects a world point; `None` when culled by the near plane or the
/// image bounds.
pub fn project_point(k: &CameraIntrinsics, pose: &Pose, p: &Point3) -> Option<Projection> {
    let (xc, yc, zc) = world_to_camera(pose, p);
    if !(zc > NEAR_PLANE) {
        return None;
    }
    let u = k.fx * (xc / zc) + k.cx;
    let v = k.fy * (yc / zc) + k.cy;
    let inside = u >= 0.0 && u < k.width as f64 && v >= 0.0 && v < k.height as f64;
    inside.then_some(Projection { u, v, depth: zc })
}

/// Inverse of [`project_point`] for a known depth.
pub fn back_project(k: &CameraIntrinsics, pose: &Pose, u: f64, v: f64, depth: f64) -> Point3 {
    let xc = (u - k.cx) / k.fx * depth;
    let yc = (v - k.cy) / k.fy * depth;
    camera_to_world(pose, xc, yc, depth)
}
