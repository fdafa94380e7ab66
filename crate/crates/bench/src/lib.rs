//! Fixtures shared by the benchmarks.

use rand::Rng;
use rawpriv_core::adversary::CostMatrix;
use rawpriv_core::nvs::{corridor_scene, CorridorParams, CorridorScene};
use rawpriv_core::obfuscation::{
    emit_shared_stream, ObfuscationPolicy, PseudonymPolicy, ShareOptions, SharedFrame,
};
use rawpriv_core::rng;
use rawpriv_core::scene::{generate_scenario, RoadLayout, Scenario};

pub fn random_costs(n: usize, seed: u64) -> CostMatrix {
    let mut r = rng::stream(seed, &[]);
    CostMatrix::new(
        n,
        n,
        (0..n * n).map(|_| r.random_range(0.0..100.0)).collect(),
    )
}

pub fn scene(seed: u64) -> Scenario {
    generate_scenario(RoadLayout::GridIntersection, 8, 20.0, 0.1, seed).expect("valid scene")
}

/// All shared frames of one scene, time-sorted.
pub fn shared_frames(scene: &Scenario, sigma: f64) -> Vec<SharedFrame> {
    let policy = ObfuscationPolicy::gaussian(sigma, 9).expect("valid sigma");
    let streams = emit_shared_stream(
        scene,
        &policy,
        PseudonymPolicy::Constant,
        &ShareOptions::at_rate(10.0),
    )
    .expect("valid stream");
    let mut frames: Vec<SharedFrame> = streams.into_iter().flat_map(|s| s.frames).collect();
    frames.sort_by_key(|f| f.t);
    frames
}

pub fn corridor() -> CorridorScene {
    corridor_scene(&CorridorParams::default(), 1).expect("default corridor")
}
