use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{InferredTrack, TrackSample};
use crate::obfuscation::{Pseudonym, SharedFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Association {
    /// Greedy nearest neighbour on forged positions; pseudonyms ignored.
    Nearest { gate_radius: f64 },
    /// One track per pseudonym token.
    Pseudonym,
}

/// Builds inferred tracks from time-ordered frames.
pub fn track_shared_frames(frames: &[SharedFrame], association: Association) -> Vec<InferredTrack> {
    track_shared_frames_indexed(frames, association)
        .into_iter()
        .map(|(t, _)| t)
        .collect()
}

/// As [`track_shared_frames`], also returning the input indices of the
/// frames absorbed by each track.
pub fn track_shared_frames_indexed(
    frames: &[SharedFrame],
    association: Association,
) -> Vec<(InferredTrack, Vec<usize>)> {
    let mut order: Vec<usize> = (0..frames.len()).collect();
    order.sort_by_key(|&i| frames[i].t);

    match association {
        Association::Nearest { gate_radius } => nearest(frames, &order, gate_radius),
        Association::Pseudonym => by_pseudonym(frames, &order),
    }
}

fn sample_of(f: &SharedFrame) -> TrackSample {
    TrackSample {
        t: f.t,
        x: f.forged_pose.x,
        y: f.forged_pose.y,
    }
}

fn new_track(id: usize, frame: &SharedFrame, index: usize) -> (InferredTrack, Vec<usize>) {
    (
        InferredTrack {
            track_id: id as u32,
            samples: vec![sample_of(frame)],
            source_pseudonyms: BTreeSet::from([frame.pseudonym]),
        },
        vec![index],
    )
}

fn push(entry: &mut (InferredTrack, Vec<usize>), frame: &SharedFrame, index: usize) {
    entry.0.samples.push(sample_of(frame));
    entry.0.source_pseudonyms.insert(frame.pseudonym);
    entry.1.push(index);
}

fn nearest(
    frames: &[SharedFrame],
    order: &[usize],
    gate_radius: f64,
) -> Vec<(InferredTrack, Vec<usize>)> {
    let mut tracks: Vec<(InferredTrack, Vec<usize>)> = Vec::new();
    // last known position per track, kept flat for the inner loop
    let mut last: Vec<(f64, f64)> = Vec::new();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();

    let mut start = 0;
    while start < order.len() {
        let t = frames[order[start]].t;
        let end = start + order[start..].partition_point(|&i| frames[i].t == t);
        let step = &order[start..end];

        candidates.clear();
        for (slot, &fi) in step.iter().enumerate() {
            let p = &frames[fi].forged_pose;
            for (k, &(lx, ly)) in last.iter().enumerate() {
                let d = (p.x - lx).hypot(p.y - ly);
                if d <= gate_radius {
                    candidates.push((d, k, slot));
                }
            }
        }
        // smaller distance first, then lower track id
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut frame_taken = vec![false; step.len()];
        let mut track_taken = vec![false; tracks.len()];
        for &(_, k, slot) in &candidates {
            if frame_taken[slot] || track_taken[k] {
                continue;
            }
            frame_taken[slot] = true;
            track_taken[k] = true;
            let fi = step[slot];
            push(&mut tracks[k], &frames[fi], fi);
            last[k] = (frames[fi].forged_pose.x, frames[fi].forged_pose.y);
        }
        for (slot, &fi) in step.iter().enumerate() {
            if !frame_taken[slot] {
                tracks.push(new_track(tracks.len(), &frames[fi], fi));
                last.push((frames[fi].forged_pose.x, frames[fi].forged_pose.y));
            }
        }
        start = end;
    }
    tracks
}

fn by_pseudonym(frames: &[SharedFrame], order: &[usize]) -> Vec<(InferredTrack, Vec<usize>)> {
    let mut tracks: Vec<(InferredTrack, Vec<usize>)> = Vec::new();
    let mut index: HashMap<Pseudonym, usize> = HashMap::new();
    for &fi in order {
        let frame = &frames[fi];
        match index.get(&frame.pseudonym) {
            Some(&k) => push(&mut tracks[k], frame, fi),
            None => {
                index.insert(frame.pseudonym, tracks.len());
                tracks.push(new_track(tracks.len(), frame, fi));
            }
        }
    }
    tracks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obfuscation::{
        emit_shared_stream, Micros, ObfuscationPolicy, PayloadDescriptor, Priority,
        PseudonymPolicy, ShareOptions, StackTag,
    };
    use crate::scene::{constant_velocity_trajectory, PointCloud, Pose, Scenario, VehicleId};

    fn frame(pseudonym: u64, t_ms: u64, x: f64, y: f64) -> SharedFrame {
        SharedFrame {
            pseudonym: Pseudonym(pseudonym),
            t: Micros(t_ms * 1000),
            forged_pose: Pose::new(x, y, 0.0, 0.0),
            payload: PayloadDescriptor::default(),
            priority: Priority::Normal,
            stack_tag: StackTag::Open,
        }
    }

    fn flatten(streams: &[crate::obfuscation::SharerStream]) -> Vec<SharedFrame> {
        let mut all: Vec<SharedFrame> = streams.iter().flat_map(|s| s.frames.clone()).collect();
        all.sort_by_key(|f| f.t);
        all
    }

    fn parallel_scenario(gap: f64) -> Scenario {
        let ego = constant_velocity_trajectory(
            VehicleId(0),
            Pose::new(0.0, -50.0, 0.0, 0.0),
            0.0,
            10.0,
            0.1,
        )
        .unwrap();
        let a = constant_velocity_trajectory(
            VehicleId(1),
            Pose::new(0.0, 0.0, 0.0, 0.0),
            10.0,
            10.0,
            0.1,
        )
        .unwrap();
        let b = constant_velocity_trajectory(
            VehicleId(2),
            Pose::new(0.0, gap, 0.0, 0.0),
            10.0,
            10.0,
            0.1,
        )
        .unwrap();
        Scenario::new(
            "parallel",
            vec![ego, a, b],
            VehicleId(0),
            PointCloud::default(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn single_target_single_track() {
        let frames: Vec<_> = (0..100).map(|i| frame(1, i * 100, i as f64, 0.0)).collect();
        let tracks = track_shared_frames(&frames, Association::Nearest { gate_radius: 50.0 });
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].samples.len(), 100);
        assert!(tracks[0].samples.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn separated_parallel_sharers_never_swap() {
        let s = parallel_scenario(100.0);
        let streams = emit_shared_stream(
            &s,
            &ObfuscationPolicy::none(),
            PseudonymPolicy::Constant,
            &ShareOptions::at_rate(10.0),
        )
        .unwrap();
        let frames = flatten(&streams);
        let tracks = track_shared_frames(&frames, Association::Nearest { gate_radius: 50.0 });
        assert_eq!(tracks.len(), 2);
        for t in &tracks {
            assert_eq!(t.samples.len(), 100);
            let y0 = t.samples[0].y;
            assert!(t.samples.iter().all(|s| s.y == y0));
        }
    }

    #[test]
    fn ties_prefer_lower_track_id() {
        // two tracks equidistant from one new frame
        let frames = vec![
            frame(1, 0, -1.0, 0.0),
            frame(2, 0, 1.0, 0.0),
            frame(3, 100, 0.0, 0.0),
        ];
        let tracks = track_shared_frames(&frames, Association::Nearest { gate_radius: 5.0 });
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[0].samples.len(), 2);
        assert_eq!(tracks[1].samples.len(), 1);
    }

    #[test]
    fn track_claimed_once_per_timestep() {
        let frames = vec![
            frame(1, 0, 0.0, 0.0),
            frame(1, 100, 0.5, 0.0),
            frame(2, 100, 1.0, 0.0),
        ];
        let tracks = track_shared_frames(&frames, Association::Nearest { gate_radius: 5.0 });
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[0].samples[1].x, 0.5);
        assert_eq!(tracks[1].samples[0].x, 1.0);
    }

    #[test]
    fn outside_gate_starts_new_track() {
        let frames = vec![frame(1, 0, 0.0, 0.0), frame(1, 100, 30.0, 0.0)];
        let tracks = track_shared_frames(&frames, Association::Nearest { gate_radius: 25.0 });
        assert_eq!(tracks.len(), 2);
        // pseudonym mode stitches them
        let tracks = track_shared_frames(&frames, Association::Pseudonym);
        assert_eq!(tracks.len(), 1);
    }

    #[test]
    fn pseudonyms_recorded_not_used() {
        let frames: Vec<_> = (0..30)
            .map(|i| frame(i / 10, i * 100, i as f64, 0.0))
            .collect();
        let tracks = track_shared_frames(&frames, Association::Nearest { gate_radius: 5.0 });
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].source_pseudonyms.len(), 3);
        assert_eq!(
            track_shared_frames(&frames, Association::Pseudonym).len(),
            3
        );
    }
}
