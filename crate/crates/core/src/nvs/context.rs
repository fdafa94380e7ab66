use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::CameraIntrinsics;
use super::render::{fuse_frames, render_depth, DepthMap};
use super::NvsError;
use crate::rng;
use crate::scene::{sample_box_surface, sample_plane, Point3, PointCloud, Pose};

pub const CONTEXT_CSV_HEADER: &str = "context_length,novel_offset,hole_fraction,points_rendered";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextRow {
    pub context_length: usize,
    pub novel_offset: f64,
    pub hole_fraction: f64,
    pub points_rendered: usize,
}

impl ContextRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.context_length, self.novel_offset, self.hole_fraction, self.points_rendered
        )
    }
}

/// The pose moved `offset` metres to the left of its heading.
pub fn lateral_offset(pose: &Pose, offset: f64) -> Pose {
    let (s, c) = pose.heading.sin_cos();
    pose.translated(-s * offset, c * offset)
}

/// For each context length `k`, fuses the last `k` frames rendered from the
/// true poses and renders the result from the last pose shifted sideways by
/// `novel_offset`.
pub fn hole_fraction_vs_context(
    k: &CameraIntrinsics,
    world: &PointCloud,
    trajectory: &[Pose],
    novel_offset: f64,
    context_lengths: &[usize],
) -> Result<Vec<ContextRow>, NvsError> {
    if let [first, ..] = context_lengths {
        if *first == 0 {
            return Err(NvsError::InvalidParameter("context length 0".into()));
        }
    }
    if context_lengths.windows(2).any(|w| w[1] < w[0]) {
        return Err(NvsError::InvalidParameter(
            "context lengths must be sorted ascending".into(),
        ));
    }
    let longest = context_lengths.last().copied().unwrap_or(0);
    if longest > trajectory.len() {
        return Err(NvsError::InvalidParameter(format!(
            "context length {longest} exceeds the {} available frames",
            trajectory.len()
        )));
    }
    if !novel_offset.is_finite() {
        return Err(NvsError::InvalidParameter(format!(
            "novel offset {novel_offset}"
        )));
    }

    // newest first, so views[..k] is the last k frames
    let views: Vec<(Pose, DepthMap)> = trajectory[trajectory.len() - longest..]
        .par_iter()
        .rev()
        .map(|pose| (*pose, render_depth(k, pose, world).depth))
        .collect();
    let novel = lateral_offset(trajectory.last().expect("non-empty"), novel_offset);

    Ok(context_lengths
        .par_iter()
        .map(|&n| {
            let cloud = fuse_frames(&views[..n], k);
            let r = render_depth(k, &novel, &cloud);
            ContextRow {
                context_length: n,
                novel_offset,
                hole_fraction: r.hole_fraction,
                points_rendered: r.points_rendered,
            }
        })
        .collect())
}

pub fn context_csv(rows: &[ContextRow]) -> String {
    let mut out = String::from(CONTEXT_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorridorScene {
    pub intrinsics: CameraIntrinsics,
    pub world: PointCloud,
    /// Camera path down the corridor centre line, heading +x.
    pub trajectory: Vec<Pose>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorridorParams {
    pub length: f64,
    pub half_width: f64,
    pub height: f64,
    pub camera_height: f64,
    pub frames: usize,
    pub frame_spacing: f64,
    /// Surface samples per square metre.
    pub density: f64,
    pub pillar_spacing: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub focal: f64,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self {
            length: 60.0,
            half_width: 4.0,
            height: 4.0,
            camera_height: 1.5,
            frames: 12,
            frame_spacing: 1.5,
            density: 1000.0,
            pillar_spacing: 6.0,
            image_width: 96,
            image_height: 72,
            focal: 60.0,
        }
    }
}

/// A closed corridor with pillars along both walls, sampled as points.
pub fn corridor_scene(params: &CorridorParams, seed: u64) -> Result<CorridorScene, NvsError> {
    let p = params;
    if !(p.length > 0.0
        && p.half_width > 0.0
        && p.height > p.camera_height
        && p.camera_height > 0.0)
        || p.frames == 0
        || !(p.frame_spacing >= 0.0)
        || !(p.density > 0.0)
        || !(p.pillar_spacing > 0.0)
        || (p.frames - 1) as f64 * p.frame_spacing >= p.length
    {
        return Err(NvsError::InvalidParameter(format!("corridor {p:?}")));
    }
    let intrinsics = CameraIntrinsics::centered(p.focal, p.image_width, p.image_height)?;
    let mut rng = rng::stream(seed, &[0xc0221d02]);
    let (l, w, h) = (p.length, p.half_width, p.height);
    let start = -10.0;
    let count = |area: f64| (area * p.density).round() as usize;

    let mut points = Vec::new();
    // floor, ceiling, side walls, end walls
    for z in [0.0, h] {
        points.extend(sample_plane(
            Point3::new(start, -w, z),
            Point3::new(l, 0.0, 0.0),
            Point3::new(0.0, 2.0 * w, 0.0),
            count(2.0 * w * l),
            &mut rng,
        ));
    }
    for y in [-w, w] {
        points.extend(sample_plane(
            Point3::new(start, y, 0.0),
            Point3::new(l, 0.0, 0.0),
            Point3::new(0.0, 0.0, h),
            count(l * h),
            &mut rng,
        ));
    }
    for x in [start, start + l] {
        points.extend(sample_plane(
            Point3::new(x, -w, 0.0),
            Point3::new(0.0, 2.0 * w, 0.0),
            Point3::new(0.0, 0.0, h),
            count(2.0 * w * h),
            &mut rng,
        ));
    }
    for side in [-1.0, 1.0] {
        let mut x = start + rng.random_range(0.0..p.pillar_spacing);
        while x < start + l - 1.0 {
            let depth = rng.random_range(0.6..1.2);
            let width = rng.random_range(0.4..0.8);
            let (y0, y1) = if side < 0.0 {
                (-w, -w + depth)
            } else {
                (w - depth, w)
            };
            let area = 2.0 * (width + depth) * h + 2.0 * width * depth;
            points.extend(sample_box_surface(
                Point3::new(x, y0, 0.0),
                Point3::new(x + width, y1, h),
                count(area),
                &mut rng,
            ));
            x += p.pillar_spacing * rng.random_range(0.7..1.3);
        }
    }

    let trajectory = (0..p.frames)
        .map(|i| Pose::new(i as f64 * p.frame_spacing, 0.0, p.camera_height, 0.0))
        .collect();
    Ok(CorridorScene {
        intrinsics,
        world: PointCloud::new(points),
        trajectory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthGain {
    pub coverage_without: f64,
    pub coverage_with: f64,
    /// Mean |depth - truth| over pixels covered only with the contributor
    /// cloud; `None` when nothing was gained.
    pub mean_abs_depth_error: Option<f64>,
    pub gained_pixels: usize,
}

/// Cloud a camera at `pose` recovers of the static `world` when transient
/// `occluders` (other traffic) block part of its view. Pixels showing an
/// occluder are dropped.
pub fn static_view_cloud(
    k: &CameraIntrinsics,
    pose: &Pose,
    world: &PointCloud,
    occluders: &PointCloud,
) -> PointCloud {
    let mut seen = render_depth(k, pose, world).depth;
    let blocked = render_depth(k, pose, occluders).depth;
    for (d, b) in seen.depth.iter_mut().zip(&blocked.depth) {
        if *b <= *d {
            *d = DepthMap::HOLE;
        }
    }
    fuse_frames(&[(*pose, seen)], k)
}

/// Ego coverage from its own single frame, with and without a
/// contributor's cloud. Truth depth comes from rendering `world` directly.
pub fn cooperative_depth_gain(
    k: &CameraIntrinsics,
    ego_pose: &Pose,
    contributor_cloud: &PointCloud,
    world: &PointCloud,
    occluders: &PointCloud,
) -> DepthGain {
    let own = static_view_cloud(k, ego_pose, world, occluders);
    let without = render_depth(k, ego_pose, &own).depth;
    let with = render_depth(k, ego_pose, &own.union(contributor_cloud)).depth;
    let truth = render_depth(k, ego_pose, world).depth;

    let (mut gained, mut err, mut scored) = (0, 0.0, 0usize);
    for i in 0..with.depth.len() {
        if without.is_hole(i) && !with.is_hole(i) {
            gained += 1;
            if !truth.is_hole(i) {
                err += (with.depth[i] - truth.depth[i]).abs();
                scored += 1;
            }
        }
    }
    let n = with.depth.len() as f64;
    DepthGain {
        coverage_without: 1.0 - without.hole_count() as f64 / n,
        coverage_with: 1.0 - with.hole_count() as f64 / n,
        mean_abs_depth_error: (scored > 0).then(|| err / scored as f64),
        gained_pixels: gained,
    }
}
