use std::fmt::Write as _;

use rand::seq::index;

use super::camera::{back_project, project_point, CameraIntrinsics};
use crate::rng;
use crate::scene::{PointCloud, Pose};

/// Depth grid, row-major. Holes hold [`DepthMap::HOLE`].
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
}

impl DepthMap {
    pub const HOLE: f64 = f64::INFINITY;

    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            depth: vec![Self::HOLE; width as usize * height as usize],
        }
    }

    pub fn get(&self, u: u32, v: u32) -> Option<f64> {
        let d = self.depth[v as usize * self.width as usize + u as usize];
        (d != Self::HOLE).then_some(d)
    }

    pub fn is_hole(&self, i: usize) -> bool {
        self.depth[i] == Self::HOLE
    }

    pub fn hole_count(&self) -> usize {
        self.depth.iter().filter(|&&d| d == Self::HOLE).count()
    }

    pub fn hole_fraction(&self) -> f64 {
        self.hole_count() as f64 / self.depth.len() as f64
    }

    /// `true` where a pixel holds depth.
    pub fn coverage(&self) -> Vec<bool> {
        self.depth.iter().map(|&d| d != Self::HOLE).collect()
    }

    /// Plain-text grid: a `width height` line, then one line per row with
    /// `-1` for holes.
    pub fn to_ascii_grid(&self) -> String {
        let mut out = format!("{} {}\n", self.width, self.height);
        for row in self.depth.chunks(self.width as usize) {
            let mut first = true;
            for &d in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                if d == Self::HOLE {
                    out.push_str("-1");
                } else {
                    write!(out, "{d:.3}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderReport {
    pub depth: DepthMap,
    pub hole_fraction: f64,
    /// Points that survived culling and splatted a pixel.
    pub points_rendered: usize,
}

/// Z-buffered 1-pixel splatting: each pixel keeps the nearest depth.
pub fn render_depth(k: &CameraIntrinsics, pose: &Pose, cloud: &PointCloud) -> RenderReport {
    let mut depth = DepthMap::empty(k.width, k.height);
    let mut points_rendered = 0;
    for p in &cloud.points {
        if let Some(proj) = project_point(k, pose, p) {
            points_rendered += 1;
            let cell = &mut depth.depth[proj.pixel(k)];
            if proj.depth < *cell {
                *cell = proj.depth;
            }
        }
    }
    RenderReport {
        hole_fraction: depth.hole_fraction(),
        depth,
        points_rendered,
    }
}

/// Back-projects every non-hole pixel through its centre into the world
/// frame and concatenates the results. No deduplication.
pub fn fuse_frames(views: &[(Pose, DepthMap)], k: &CameraIntrinsics) -> PointCloud {
    let mut points = Vec::new();
    for (pose, map) in views {
        for (i, &d) in map.depth.iter().enumerate() {
            if d == DepthMap::HOLE {
                continue;
            }
            let u = (i % map.width as usize) as f64 + 0.5;
            let v = (i / map.width as usize) as f64 + 0.5;
            points.push(back_project(k, pose, u, v, d));
        }
    }
    PointCloud::new(points)
}

/// Turns exactly `round(mask_fraction * non_holes)` uniformly chosen
/// non-hole pixels into holes.
pub fn apply_random_mask(map: &DepthMap, mask_fraction: f64, seed: u64) -> DepthMap {
    assert!(
        (0.0..=1.0).contains(&mask_fraction),
        "mask_fraction {mask_fraction} outside [0, 1]"
    );
    let filled: Vec<usize> = (0..map.depth.len()).filter(|&i| !map.is_hole(i)).collect();
    let n = (mask_fraction * filled.len() as f64).round() as usize;
    let mut out = map.clone();
    let mut rng = rng::stream(seed, &[0x3a5c]);
    for j in index::sample(&mut rng, filled.len(), n) {
        out.depth[filled[j]] = DepthMap::HOLE;
    }
    out
}
