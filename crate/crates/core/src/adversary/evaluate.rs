use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    build_cost_matrix, hungarian_assign, track_shared_frames_indexed, AdversaryError, Association,
    ObservedTrack, TrackSample,
};
use crate::obfuscation::{Micros, SharedFrame, SharerStream};
use crate::scene::{Scenario, Trajectory, VehicleId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    pub sensing_radius: f64,
    pub association: Association,
}

impl AttackParams {
    pub fn nearest(sensing_radius: f64, gate_radius: f64) -> Self {
        Self {
            sensing_radius,
            association: Association::Nearest { gate_radius },
        }
    }
}

impl Default for AttackParams {
    fn default() -> Self {
        Self::nearest(100.0, 25.0)
    }
}

/// Outcome for one inferred track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackMatch {
    pub track_id: u32,
    /// Vehicle the adversary bound the track to, if any.
    pub vehicle: Option<VehicleId>,
    /// Sharer contributing most of the track's frames.
    pub true_sharer: VehicleId,
    /// Whether binding to `true_sharer` was an admissible option.
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub pairs: Vec<TrackMatch>,
    pub total_cost: f64,
    pub confusion_rate: f64,
    /// Pooled over every track sample against its majority sharer's truth.
    pub rmse: f64,
    /// Over matched tracks only, against the matched vehicle's truth.
    pub rmse_matched: Option<f64>,
}

impl AssignmentResult {
    pub fn eligible_tracks(&self) -> usize {
        self.pairs.iter().filter(|p| p.eligible).count()
    }

    pub fn confused_tracks(&self) -> usize {
        self.pairs
            .iter()
            .filter(|p| p.eligible && p.vehicle != Some(p.true_sharer))
            .count()
    }
}

fn sample_index(traj: &Trajectory, t: Micros) -> usize {
    ((t.as_secs() / traj.dt).round() as usize).min(traj.len() - 1)
}

/// Tracks of every non-ego vehicle over the samples where it lies within
/// `sensing_radius` of the ego. Vehicles never in range are omitted.
pub fn observe_physical(
    scenario: &Scenario,
    sensing_radius: f64,
) -> Result<Vec<ObservedTrack>, AdversaryError> {
    if !(sensing_radius > 0.0) {
        return Err(AdversaryError::InvalidParameter(format!(
            "sensing radius must be positive, got {sensing_radius}"
        )));
    }
    let ego = scenario.ego();
    Ok(scenario
        .sharers()
        .filter_map(|tr| {
            let samples: Vec<TrackSample> = tr
                .poses
                .iter()
                .zip(&ego.poses)
                .enumerate()
                .filter(|(_, (p, e))| p.planar_distance(e) <= sensing_radius)
                .map(|(i, (p, _))| TrackSample {
                    t: Micros::from_secs(scenario.time(i)),
                    x: p.x,
                    y: p.y,
                })
                .collect();
            (!samples.is_empty()).then_some(ObservedTrack {
                vehicle_id: tr.vehicle_id,
                samples,
            })
        })
        .collect())
}

/// Runs the full attack on one scenario and scores it.
///
/// A track is *eligible* when its majority sharer was observed and the pair
/// is admissible in the cost matrix. The confusion rate is the share of
/// eligible tracks not bound to their majority sharer, whether bound to
/// another vehicle or left unmatched.
pub fn evaluate_privacy(
    scenario: &Scenario,
    streams: &[SharerStream],
    params: &AttackParams,
) -> Result<AssignmentResult, AdversaryError> {
    let mut frames: Vec<SharedFrame> = Vec::new();
    let mut origin: Vec<VehicleId> = Vec::new();
    for s in streams {
        frames.extend_from_slice(&s.frames);
        origin.extend(std::iter::repeat_n(s.sharer, s.frames.len()));
    }

    let observed = observe_physical(scenario, params.sensing_radius)?;
    if observed.is_empty() {
        return Err(AdversaryError::Degenerate(format!(
            "no sharer within {} m of ego {}",
            params.sensing_radius, scenario.ego_id
        )));
    }

    let built = track_shared_frames_indexed(&frames, params.association);
    let majority: Vec<VehicleId> = built
        .iter()
        .map(|(_, members)| {
            let mut counts: BTreeMap<VehicleId, usize> = BTreeMap::new();
            for &i in members {
                *counts.entry(origin[i]).or_default() += 1;
            }
            // ties go to the lower vehicle id
            counts
                .into_iter()
                .fold((VehicleId(u32::MAX), 0), |best, (v, n)| {
                    if n > best.1 {
                        (v, n)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect();
    let tracks: Vec<_> = built.into_iter().map(|(t, _)| t).collect();

    let costs = build_cost_matrix(&tracks, &observed);
    let assignment = hungarian_assign(&costs);
    let column_of: BTreeMap<VehicleId, usize> = observed
        .iter()
        .enumerate()
        .map(|(c, o)| (o.vehicle_id, c))
        .collect();

    let pairs: Vec<TrackMatch> = tracks
        .iter()
        .enumerate()
        .map(|(r, track)| {
            let true_sharer = majority[r];
            let eligible = column_of
                .get(&true_sharer)
                .is_some_and(|&c| costs.is_allowed(r, c));
            TrackMatch {
                track_id: track.track_id,
                vehicle: assignment.row_to_col[r].map(|c| observed[c].vehicle_id),
                true_sharer,
                eligible,
            }
        })
        .collect();

    let eligible = pairs.iter().filter(|p| p.eligible).count();
    if eligible == 0 {
        return Err(AdversaryError::Degenerate(
            "no shared track overlaps its sender's observation".into(),
        ));
    }
    let confused = pairs
        .iter()
        .filter(|p| p.eligible && p.vehicle != Some(p.true_sharer))
        .count();

    let truth = |id: VehicleId| scenario.trajectory(id).expect("track sources are sharers");
    let squared_error = |track: &super::InferredTrack, traj: &Trajectory| -> (f64, usize) {
        track.samples.iter().fold((0.0, 0), |(sum, n), s| {
            let p = &traj.poses[sample_index(traj, s.t)];
            (sum + (s.x - p.x).powi(2) + (s.y - p.y).powi(2), n + 1)
        })
    };

    let (mut sum, mut n) = (0.0, 0usize);
    let (mut sum_m, mut n_m) = (0.0, 0usize);
    for (track, pair) in tracks.iter().zip(&pairs) {
        let (s, k) = squared_error(track, truth(pair.true_sharer));
        sum += s;
        n += k;
        if let Some(v) = pair.vehicle {
            let (s, k) = squared_error(track, truth(v));
            sum_m += s;
            n_m += k;
        }
    }

    Ok(AssignmentResult {
        pairs,
        total_cost: assignment.total_cost,
        confusion_rate: confused as f64 / eligible as f64,
        rmse: (sum / n as f64).sqrt(),
        rmse_matched: (n_m > 0).then(|| (sum_m / n_m as f64).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obfuscation::{
        emit_shared_stream, ObfuscationPolicy, PseudonymPolicy, ShareOptions,
    };
    use crate::scene::{constant_velocity_trajectory, PointCloud, Pose};

    fn cv(id: u32, x: f64, y: f64, heading: f64, speed: f64) -> Trajectory {
        constant_velocity_trajectory(
            VehicleId(id),
            Pose::new(x, y, 0.0, heading),
            speed,
            10.0,
            0.1,
        )
        .unwrap()
    }

    fn lanes() -> Scenario {
        Scenario::new(
            "lanes",
            vec![
                cv(0, 0.0, 0.0, 0.0, 10.0),
                cv(1, 0.0, 40.0, 0.0, 10.0),
                cv(2, 0.0, -40.0, 0.0, 10.0),
                cv(3, 20.0, 80.0, 0.0, 10.0),
            ],
            VehicleId(0),
            PointCloud::default(),
            0,
        )
        .unwrap()
    }

    fn streams(s: &Scenario, p: &ObfuscationPolicy) -> Vec<SharerStream> {
        emit_shared_stream(
            s,
            p,
            PseudonymPolicy::Constant,
            &ShareOptions::at_rate(10.0),
        )
        .unwrap()
    }

    #[test]
    fn perfect_leak_without_obfuscation() {
        let s = lanes();
        let r = evaluate_privacy(
            &s,
            &streams(&s, &ObfuscationPolicy::none()),
            &AttackParams::default(),
        )
        .unwrap();
        assert_eq!(r.confusion_rate, 0.0);
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.rmse_matched, Some(0.0));
        assert_eq!(r.total_cost, 0.0);
        assert_eq!(r.pairs.len(), 3);
        assert!(r.pairs.iter().all(|p| p.vehicle == Some(p.true_sharer)));
    }

    #[test]
    fn constant_offset_rmse_equals_offset() {
        let s = Scenario::new(
            "one",
            vec![cv(0, 0.0, 0.0, 0.0, 5.0), cv(1, 0.0, 10.0, 0.0, 5.0)],
            VehicleId(0),
            PointCloud::default(),
            0,
        )
        .unwrap();
        let p = ObfuscationPolicy::fixed_offset(7.5, 3).unwrap();
        let r = evaluate_privacy(&s, &streams(&s, &p), &AttackParams::default()).unwrap();
        assert!((r.rmse - 7.5).abs() < 1e-9, "{}", r.rmse);
        assert_eq!(r.confusion_rate, 0.0);
    }

    #[test]
    fn nobody_observed_is_degenerate() {
        let s = lanes();
        let err = evaluate_privacy(
            &s,
            &streams(&s, &ObfuscationPolicy::none()),
            &AttackParams::nearest(0.001, 25.0),
        );
        assert!(matches!(err, Err(AdversaryError::Degenerate(_))));
    }

    #[test]
    fn wide_sensing_observes_everyone() {
        let s = lanes();
        let obs = observe_physical(&s, 1e6).unwrap();
        assert_eq!(obs.len(), 3);
        assert!(obs.iter().all(|o| o.samples.len() == 101));
        assert!(observe_physical(&s, 0.001).unwrap().is_empty());
        assert!(observe_physical(&s, 0.0).is_err());
    }

    #[test]
    fn swapped_sharers_register_as_confusion() {
        let s = lanes();
        let mut st = streams(&s, &ObfuscationPolicy::none());
        // sharers 1 and 2 exchange forged positions wholesale
        let (a, b) = st.split_at_mut(1);
        for (fa, fb) in a[0].frames.iter_mut().zip(b[0].frames.iter_mut()) {
            std::mem::swap(&mut fa.forged_pose, &mut fb.forged_pose);
        }
        let r = evaluate_privacy(&s, &st, &AttackParams::default()).unwrap();
        assert!((r.confusion_rate - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.rmse - (2.0f64 * 80.0 * 80.0 / 3.0).sqrt()).abs() < 1e-9);
        assert_eq!(r.rmse_matched, Some(0.0));
    }

    #[test]
    fn metrics_in_range_under_noise() {
        let s = lanes();
        for sigma in [1.0, 10.0, 30.0] {
            let p = ObfuscationPolicy::gaussian(sigma, 5).unwrap();
            let r = evaluate_privacy(&s, &streams(&s, &p), &AttackParams::default()).unwrap();
            assert!((0.0..=1.0).contains(&r.confusion_rate));
            assert!(r.rmse.is_finite() && r.rmse > 0.0);
        }
    }
}
