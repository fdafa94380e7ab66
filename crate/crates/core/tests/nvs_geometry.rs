use proptest::prelude::*;
use rand::Rng;
use rawpriv_core::nvs::{
    back_project, corridor_scene, fuse_frames, hole_fraction_vs_context, lateral_offset,
    project_point, render_depth, CameraIntrinsics, CorridorParams,
};
use rawpriv_core::rng;
use rawpriv_core::scene::{Point3, PointCloud, Pose};

fn k() -> CameraIntrinsics {
    CameraIntrinsics::new(80.0, 70.0, 40.0, 30.0, 80, 60).unwrap()
}

#[test]
fn projection_inverse_on_random_points() {
    let mut r = rng::stream(11, &[]);
    let mut checked = 0;
    while checked < 10_000 {
        let pose = Pose::new(
            r.random_range(-50.0..50.0),
            r.random_range(-50.0..50.0),
            r.random_range(0.0..3.0),
            r.random_range(-3.1..3.1),
        );
        let p = Point3::new(
            pose.x + r.random_range(-30.0..30.0),
            pose.y + r.random_range(-30.0..30.0),
            r.random_range(-5.0..10.0),
        );
        let Some(proj) = project_point(&k(), &pose, &p) else {
            continue;
        };
        let q = back_project(&k(), &pose, proj.u, proj.v, proj.depth);
        assert!(q.distance(&p) <= 1e-9, "{p:?} -> {q:?}");
        checked += 1;
    }
}

#[test]
fn zbuffer_matches_per_pixel_scan() {
    let mut r = rng::stream(12, &[]);
    for trial in 0..50 {
        let pts: Vec<Point3> = (0..300)
            .map(|_| {
                Point3::new(
                    r.random_range(0.5..8.0),
                    r.random_range(-3.0..3.0),
                    r.random_range(-2.0..2.0),
                )
            })
            .collect();
        // coarse image so many points collide
        let small = CameraIntrinsics::new(6.0, 6.0, 4.0, 3.0, 8, 6).unwrap();
        let pose = Pose::default();
        let rep = render_depth(&small, &pose, &PointCloud::new(pts.clone()));
        for v in 0..small.height {
            for u in 0..small.width {
                let mut best: Option<f64> = None;
                for p in &pts {
                    if let Some(pr) = project_point(&small, &pose, p) {
                        if pr.u.floor() as u32 == u && pr.v.floor() as u32 == v {
                            best = Some(best.map_or(pr.depth, |b: f64| b.min(pr.depth)));
                        }
                    }
                }
                assert_eq!(rep.depth.get(u, v), best, "trial {trial} pixel ({u},{v})");
            }
        }
    }
}

#[test]
fn two_views_cover_union_of_footprints() {
    // wall at x = 10, views 2 m apart
    let mut r = rng::stream(13, &[]);
    let wall: Vec<Point3> = (0..200_000)
        .map(|_| {
            Point3::new(
                10.0,
                r.random_range(-20.0..20.0),
                r.random_range(-10.0..10.0),
            )
        })
        .collect();
    let world = PointCloud::new(wall);
    let a = Pose::new(0.0, 0.0, 0.0, 0.0);
    let b = Pose::new(0.0, 2.0, 0.0, 0.0);
    let ra = render_depth(&k(), &a, &world).depth;
    let rb = render_depth(&k(), &b, &world).depth;
    let fused = fuse_frames(&[(a, ra.clone()), (b, rb.clone())], &k());
    assert_eq!(
        fused.len(),
        ra.coverage()
            .iter()
            .chain(&rb.coverage())
            .filter(|c| **c)
            .count()
    );
    let ys: Vec<f64> = fused.points.iter().map(|p| p.y).collect();
    let (lo, hi) = ys
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &y| (l.min(y), h.max(y)));
    // each view spans y in [-5, 5] about its own axis at 10 m (80 px / 80 px focal)
    assert!(
        (lo + 5.0).abs() < 0.2 && (hi - 7.0).abs() < 0.2,
        "{lo} {hi}"
    );
}

#[test]
fn adding_frames_only_adds_coverage() {
    let scene = corridor_scene(&CorridorParams::default(), 5).unwrap();
    let kk = scene.intrinsics;
    let traj = &scene.trajectory;
    let novel = lateral_offset(traj.last().unwrap(), 2.0);
    let views: Vec<_> = traj
        .iter()
        .rev()
        .map(|p| (*p, render_depth(&kk, p, &scene.world).depth))
        .collect();
    let mut prev: Option<Vec<bool>> = None;
    for n in 1..=views.len() {
        let cov = render_depth(&kk, &novel, &fuse_frames(&views[..n], &kk))
            .depth
            .coverage();
        if let Some(p) = &prev {
            assert!(
                p.iter().zip(&cov).all(|(a, b)| !a || *b),
                "context {n} lost a pixel"
            );
        }
        prev = Some(cov);
    }
}

#[test]
fn context_trend_on_three_seeds() {
    for seed in [1, 2, 3] {
        let s = corridor_scene(&CorridorParams::default(), seed).unwrap();
        let rows =
            hole_fraction_vs_context(&s.intrinsics, &s.world, &s.trajectory, 2.0, &[1, 2, 4, 8])
                .unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].hole_fraction <= w[0].hole_fraction + 0.01,
                "seed {seed}: {rows:?}"
            );
        }
        assert!(
            rows[3].hole_fraction <= 0.7 * rows[0].hole_fraction,
            "seed {seed}: {rows:?}"
        );
    }
}

proptest! {
    #[test]
    fn hole_fraction_in_unit_interval(
        pts in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0, -5.0f64..5.0), 0..400),
        heading in -3.0f64..3.0,
    ) {
        let cloud = PointCloud::new(pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect());
        let r = render_depth(&k(), &Pose::new(0.0, 0.0, 0.0, heading), &cloud);
        prop_assert!((0.0..=1.0).contains(&r.hole_fraction));
        prop_assert!(r.points_rendered <= cloud.len());
        let holes = r.depth.hole_count() as f64 / (80.0 * 60.0);
        prop_assert_eq!(r.hole_fraction, holes);
        prop_assert!(r.depth.depth.iter().all(|&d| d == f64::INFINITY || (d > 0.0 && d.is_finite())));
    }
}
