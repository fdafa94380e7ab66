use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Point3, PointCloud, Pose, Scenario, SceneError, Trajectory, VehicleId};
use crate::rng;

pub const LANE_WIDTH: f64 = 3.0;
/// No two vehicles start closer than this, meters.
pub const MIN_INITIAL_GAP: f64 = 5.0;

const MIN_WORLD_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoadLayout {
    Straight,
    GridIntersection,
    TwoLaneHighway,
}

impl RoadLayout {
    pub const ALL: [RoadLayout; 3] = [
        RoadLayout::Straight,
        RoadLayout::GridIntersection,
        RoadLayout::TwoLaneHighway,
    ];

    fn tag(self) -> u64 {
        match self {
            RoadLayout::Straight => 1,
            RoadLayout::GridIntersection => 2,
            RoadLayout::TwoLaneHighway => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoadLayout::Straight => "straight",
            RoadLayout::GridIntersection => "grid-intersection",
            RoadLayout::TwoLaneHighway => "two-lane-highway",
        }
    }
}

impl fmt::Display for RoadLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoadLayout {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoadLayout::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| SceneError::InvalidParameter(format!("unknown road layout `{s}`")))
    }
}

/// One lane: vehicles start at arc length `s` along `heading` from `origin`.
struct Lane {
    origin: (f64, f64),
    heading: f64,
    start_range: (f64, f64),
    speed_range: (f64, f64),
}

impl Lane {
    fn pose_at(&self, s: f64) -> Pose {
        Pose::new(
            self.origin.0 + s * self.heading.cos(),
            self.origin.1 + s * self.heading.sin(),
            0.0,
            self.heading,
        )
    }
}

fn lanes_for(layout: RoadLayout, n_vehicles: usize) -> Vec<Lane> {
    match layout {
        RoadLayout::Straight => {
            // One lane per vehicle; the lower half drives +x, the upper half -x.
            let centre = (n_vehicles as f64 - 1.0) / 2.0;
            (0..n_vehicles)
                .map(|j| {
                    let y = (j as f64 - centre) * LANE_WIDTH;
                    let heading = if j < n_vehicles / 2 { 0.0 } else { PI };
                    Lane {
                        origin: (0.0, y),
                        heading,
                        start_range: (-150.0, 50.0),
                        speed_range: (8.0, 20.0),
                    }
                })
                .collect()
        }
        RoadLayout::TwoLaneHighway => [(-1.5, 0.0), (-0.5, 0.0), (0.5, PI), (1.5, PI)]
            .into_iter()
            .map(|(k, heading)| Lane {
                origin: (0.0, k * LANE_WIDTH),
                heading,
                start_range: (-300.0, 100.0),
                speed_range: (22.0, 32.0),
            })
            .collect(),
        RoadLayout::GridIntersection => {
            let mut lanes = Vec::with_capacity(8);
            for (k, heading) in [(-1.5, 0.0), (-0.5, 0.0), (0.5, PI), (1.5, PI)] {
                lanes.push(Lane {
                    origin: (0.0, k * LANE_WIDTH),
                    heading,
                    start_range: (-120.0, -20.0),
                    speed_range: (8.0, 15.0),
                });
            }
            for (k, heading) in [
                (0.5, FRAC_PI_2),
                (1.5, FRAC_PI_2),
                (-0.5, -FRAC_PI_2),
                (-1.5, -FRAC_PI_2),
            ] {
                lanes.push(Lane {
                    origin: (k * LANE_WIDTH, 0.0),
                    heading,
                    start_range: (-120.0, -20.0),
                    speed_range: (8.0, 15.0),
                });
            }
            lanes
        }
    }
}

fn validate_timing(duration: f64, dt: f64) -> Result<usize, SceneError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SceneError::InvalidParameter(format!(
            "dt must be positive and finite, got {dt}"
        )));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(SceneError::InvalidParameter(format!(
            "duration must be positive and finite, got {duration}"
        )));
    }
    let steps = (duration / dt).round();
    if steps < 1.0 {
        return Err(SceneError::InvalidParameter(format!(
            "duration {duration} is shorter than one time step {dt}"
        )));
    }
    Ok(steps as usize + 1)
}

/// Straight-line motion along `start.heading`: sample `i` lies
/// `speed * i * dt` from `start`.
pub fn constant_velocity_trajectory(
    vehicle_id: VehicleId,
    start: Pose,
    speed: f64,
    duration: f64,
    dt: f64,
) -> Result<Trajectory, SceneError> {
    if !(speed >= 0.0 && speed.is_finite()) {
        return Err(SceneError::InvalidParameter(format!(
            "speed must be non-negative, got {speed}"
        )));
    }
    let samples = validate_timing(duration, dt)?;
    let (sin, cos) = start.heading.sin_cos();
    let poses = (0..samples)
        .map(|i| {
            let d = speed * i as f64 * dt;
            Pose {
                x: start.x + d * cos,
                y: start.y + d * sin,
                ..start
            }
        })
        .collect();
    Trajectory::new(vehicle_id, dt, poses)
}

/// Uniform samples on the parallelogram `origin + a*u + b*v`, `a, b ∈ [0, 1)`.
pub fn sample_plane<R: RngCore>(
    origin: Point3,
    u: Point3,
    v: Point3,
    n: usize,
    rng: &mut R,
) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            Point3::new(
                origin.x + a * u.x + b * v.x,
                origin.y + a * u.y + b * v.y,
                origin.z + a * u.z + b * v.z,
            )
        })
        .collect()
}

/// Uniform samples on the surface of an axis-aligned box.
pub fn sample_box_surface<R: RngCore>(
    min: Point3,
    max: Point3,
    n: usize,
    rng: &mut R,
) -> Vec<Point3> {
    let (dx, dy, dz) = (max.x - min.x, max.y - min.y, max.z - min.z);
    let areas = [dy * dz, dy * dz, dx * dz, dx * dz, dx * dy, dx * dy];
    let total: f64 = areas.iter().sum();
    (0..n)
        .map(|_| {
            let mut pick = rng.random::<f64>() * total;
            let mut face = 5;
            for (i, a) in areas.iter().enumerate() {
                if pick < *a {
                    face = i;
                    break;
                }
                pick -= a;
            }
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            match face {
                0 => Point3::new(min.x, min.y + a * dy, min.z + b * dz),
                1 => Point3::new(max.x, min.y + a * dy, min.z + b * dz),
                2 => Point3::new(min.x + a * dx, min.y, min.z + b * dz),
                3 => Point3::new(min.x + a * dx, max.y, min.z + b * dz),
                4 => Point3::new(min.x + a * dx, min.y + b * dy, min.z),
                _ => Point3::new(min.x + a * dx, min.y + b * dy, max.z),
            }
        })
        .collect()
}

fn roadside_world<R: RngCore>(layout: RoadLayout, n_lanes: usize, rng: &mut R) -> PointCloud {
    let mut points = Vec::new();
    match layout {
        RoadLayout::Straight | RoadLayout::TwoLaneHighway => {
            let half = n_lanes as f64 * LANE_WIDTH / 2.0;
            let length = 800.0;
            points.extend(sample_plane(
                Point3::new(-length / 2.0, -half - 20.0, 0.0),
                Point3::new(length, 0.0, 0.0),
                Point3::new(0.0, 2.0 * half + 40.0, 0.0),
                1200,
                rng,
            ));
            for side in [-1.0, 1.0] {
                let mut x = -length / 2.0;
                while x < length / 2.0 {
                    let w = rng.random_range(15.0..40.0);
                    let depth = rng.random_range(8.0..20.0);
                    let h = rng.random_range(6.0..25.0);
                    let near = half + rng.random_range(4.0..10.0);
                    let (y0, y1) = if side < 0.0 {
                        (-near - depth, -near)
                    } else {
                        (near, near + depth)
                    };
                    points.extend(sample_box_surface(
                        Point3::new(x, y0, 0.0),
                        Point3::new(x + w, y1, h),
                        60,
                        rng,
                    ));
                    x += w + rng.random_range(5.0..20.0);
                }
            }
        }
        RoadLayout::GridIntersection => {
            points.extend(sample_plane(
                Point3::new(-150.0, -150.0, 0.0),
                Point3::new(300.0, 0.0, 0.0),
                Point3::new(0.0, 300.0, 0.0),
                1200,
                rng,
            ));
            let clear = 2.0 * LANE_WIDTH + 6.0;
            for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                for _ in 0..4 {
                    let a = rng.random_range(clear..120.0);
                    let b = rng.random_range(clear..120.0);
                    let w = rng.random_range(10.0..25.0);
                    let d = rng.random_range(10.0..25.0);
                    let h = rng.random_range(6.0..30.0);
                    let (x0, x1) = if sx > 0.0 { (a, a + w) } else { (-a - w, -a) };
                    let (y0, y1) = if sy > 0.0 { (b, b + d) } else { (-b - d, -b) };
                    points.extend(sample_box_surface(
                        Point3::new(x0, y0, 0.0),
                        Point3::new(x1, y1, h),
                        60,
                        rng,
                    ));
                }
            }
        }
    }
    debug_assert!(points.len() >= MIN_WORLD_POINTS);
    PointCloud::new(points)
}

/// Generates a synthetic scenario. Vehicles drive at constant speed along
/// lane centres; vehicles sharing a lane share its speed so they never
/// overlap. The ego vehicle is drawn uniformly from the fleet.
pub fn generate_scenario(
    layout: RoadLayout,
    n_vehicles: usize,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<Scenario, SceneError> {
    if n_vehicles < 2 {
        return Err(SceneError::InvalidParameter(format!(
            "need at least 2 vehicles, got {n_vehicles}"
        )));
    }
    let samples = validate_timing(duration, dt)?;
    if samples < 3 {
        return Err(SceneError::InvalidParameter(format!(
            "duration {duration} must cover at least two steps of {dt}"
        )));
    }

    let mut rng = rng::stream(seed, &[layout.tag(), n_vehicles as u64]);
    let lanes = lanes_for(layout, n_vehicles);
    let lane_speeds: Vec<f64> = lanes
        .iter()
        .map(|l| rng.random_range(l.speed_range.0..=l.speed_range.1))
        .collect();

    let mut starts: Vec<Pose> = Vec::with_capacity(n_vehicles);
    let mut trajectories = Vec::with_capacity(n_vehicles);
    for v in 0..n_vehicles {
        let lane_idx = v % lanes.len();
        let lane = &lanes[lane_idx];
        let mut placed = None;
        for _ in 0..10_000 {
            let s = rng.random_range(lane.start_range.0..lane.start_range.1);
            let pose = lane.pose_at(s);
            if starts
                .iter()
                .all(|p| p.planar_distance(&pose) >= MIN_INITIAL_GAP)
            {
                placed = Some(pose);
                break;
            }
        }
        let start = placed.ok_or_else(|| {
            SceneError::InvalidParameter(format!(
                "cannot place {n_vehicles} vehicles on a {layout} layout with {MIN_INITIAL_GAP} m spacing"
            ))
        })?;
        starts.push(start);
        let duration_exact = (samples - 1) as f64 * dt;
        trajectories.push(constant_velocity_trajectory(
            VehicleId(v as u32),
            start,
            lane_speeds[lane_idx],
            duration_exact,
            dt,
        )?);
    }

    let ego_id = VehicleId(rng.random_range(0..n_vehicles as u32));
    let world = roadside_world(layout, lanes.len(), &mut rng);
    Scenario::new(
        format!("{layout}-{seed}"),
        trajectories,
        ego_id,
        world,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::DEFAULT_V_MAX;

    #[test]
    fn straight_two_vehicles_sample_count() {
        let s = generate_scenario(RoadLayout::Straight, 2, 10.0, 0.1, 7).unwrap();
        assert_eq!(s.trajectories.len(), 2);
        assert!(s.trajectories.iter().all(|t| t.len() == 101));
        assert!((s.duration - 10.0).abs() < 1e-9);
    }

    #[test]
    fn generation_is_deterministic() {
        for layout in RoadLayout::ALL {
            let a = generate_scenario(layout, 8, 20.0, 0.1, 42).unwrap();
            let b = generate_scenario(layout, 8, 20.0, 0.1, 42).unwrap();
            assert_eq!(a.to_json(), b.to_json());
            let c = generate_scenario(layout, 8, 20.0, 0.1, 43).unwrap();
            assert_ne!(a.to_json(), c.to_json());
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            generate_scenario(RoadLayout::Straight, 1, 10.0, 0.1, 7),
            Err(SceneError::InvalidParameter(_))
        ));
        assert!(generate_scenario(RoadLayout::Straight, 3, 10.0, 0.0, 7).is_err());
        assert!(generate_scenario(RoadLayout::Straight, 3, -1.0, 0.1, 7).is_err());
        assert!(generate_scenario(RoadLayout::Straight, 3, 0.1, 0.1, 7).is_err());
    }

    #[test]
    fn generated_scenarios_respect_layout_contract() {
        for layout in RoadLayout::ALL {
            for seed in 0..20 {
                let s = generate_scenario(layout, 8, 20.0, 0.1, seed).unwrap();
                assert!(s.world.len() >= MIN_WORLD_POINTS);
                for t in &s.trajectories {
                    assert!(t.respects_speed_limit(DEFAULT_V_MAX));
                    let lateral = match layout {
                        RoadLayout::GridIntersection
                            if t.poses[0].heading.abs() > 1.0 && t.poses[0].heading.abs() < 2.0 =>
                        {
                            t.poses[0].x
                        }
                        _ => t.poses[0].y,
                    };
                    // lane centres sit on a 1.5 m half-lane grid
                    let r = (lateral / (LANE_WIDTH / 2.0)).round() * LANE_WIDTH / 2.0;
                    assert!((lateral - r).abs() < 1e-9, "{layout}: off-lane {lateral}");
                }
                for (i, a) in s.trajectories.iter().enumerate() {
                    for b in &s.trajectories[i + 1..] {
                        assert!(a.poses[0].planar_distance(&b.poses[0]) >= MIN_INITIAL_GAP);
                    }
                }
            }
        }
    }

    #[test]
    fn straight_layout_uses_distinct_lanes() {
        let s = generate_scenario(RoadLayout::Straight, 8, 20.0, 0.1, 3).unwrap();
        let mut ys: Vec<i64> = s
            .trajectories
            .iter()
            .map(|t| (t.poses[0].y * 10.0).round() as i64)
            .collect();
        ys.sort_unstable();
        ys.dedup();
        assert_eq!(ys.len(), 8);
        assert_eq!(ys[1] - ys[0], 30);
    }

    #[test]
    fn constant_velocity_examples() {
        let t = constant_velocity_trajectory(
            VehicleId(0),
            Pose::new(0.0, 0.0, 0.0, 0.0),
            10.0,
            1.0,
            0.5,
        )
        .unwrap();
        let xs: Vec<f64> = t.poses.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.0, 5.0, 10.0]);

        let start = Pose::new(3.0, -2.0, 1.0, 0.7);
        let t = constant_velocity_trajectory(VehicleId(0), start, 0.0, 1.0, 0.5).unwrap();
        assert!(t.poses.iter().all(|p| *p == start));

        let t = constant_velocity_trajectory(
            VehicleId(0),
            Pose::new(0.0, 0.0, 0.0, FRAC_PI_2),
            10.0,
            1.0,
            0.5,
        )
        .unwrap();
        for (p, y) in t.poses.iter().zip([0.0, 5.0, 10.0]) {
            assert!((p.y - y).abs() < 1e-12);
            assert!(p.x.abs() < 1e-12);
        }
        assert!(constant_velocity_trajectory(VehicleId(0), start, -1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn layout_parses() {
        assert_eq!(
            "two-lane-highway".parse::<RoadLayout>().unwrap(),
            RoadLayout::TwoLaneHighway
        );
        assert!("roundabout".parse::<RoadLayout>().is_err());
    }
}
