use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_privacy, mean_sd, AdversaryError, AttackParams};
use crate::obfuscation::{emit_shared_stream, ObfuscationPolicy, PseudonymPolicy, ShareOptions};
use crate::rng;
use crate::scene::{generate_scenario, RoadLayout, Scenario, VehicleId};

pub const SWEEP_CSV_HEADER: &str =
    "sigma,mean_confusion,sd_confusion,mean_rmse,sd_rmse,n_rollouts,skipped,mean_rmse_matched";

/// How a sweep value becomes an obfuscation policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepFamily {
    /// value = per-axis standard deviation
    Gaussian,
    /// value = offset radius
    FixedOffset,
    /// value = walk radius; step sigma = `step_ratio * value`
    SmoothedRandomWalk { step_ratio: f64 },
}

impl SweepFamily {
    pub fn policy(&self, value: f64, seed: u64) -> Result<ObfuscationPolicy, AdversaryError> {
        Ok(match *self {
            SweepFamily::Gaussian => ObfuscationPolicy::gaussian(value, seed)?,
            SweepFamily::FixedOffset => ObfuscationPolicy::fixed_offset(value, seed)?,
            SweepFamily::SmoothedRandomWalk { step_ratio } => {
                ObfuscationPolicy::random_walk(step_ratio * value, value, seed)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Scene `i` uses `layouts[i % layouts.len()]`.
    pub layouts: Vec<RoadLayout>,
    pub scenes: usize,
    pub vehicles: usize,
    pub duration: f64,
    pub dt: f64,
    pub rollouts_per_scene: usize,
    pub share_rate: f64,
    pub attack: AttackParams,
    pub family: SweepFamily,
    pub pseudonyms: PseudonymPolicy,
    pub seed: u64,
}

impl Default for SweepSpec {
    /// The standard synthetic suite.
    fn default() -> Self {
        Self {
            layouts: RoadLayout::ALL.to_vec(),
            scenes: 20,
            vehicles: 8,
            duration: 20.0,
            dt: 0.1,
            rollouts_per_scene: 50,
            share_rate: 10.0,
            attack: AttackParams::default(),
            family: SweepFamily::Gaussian,
            pseudonyms: PseudonymPolicy::Constant,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub mean_confusion: f64,
    pub sd_confusion: f64,
    pub mean_rmse: f64,
    pub sd_rmse: f64,
    pub n_rollouts: usize,
    pub skipped: usize,
    pub mean_rmse_matched: f64,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.sigma,
            self.mean_confusion,
            self.sd_confusion,
            self.mean_rmse,
            self.sd_rmse,
            self.n_rollouts,
            self.skipped,
            self.mean_rmse_matched
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

type Outcome = Option<(f64, f64, Option<f64>)>;

fn rollout(
    spec: &SweepSpec,
    scene: &Scenario,
    scene_idx: usize,
    rollout_idx: usize,
    value: f64,
) -> Result<Outcome, AdversaryError> {
    let rollout_seed = rng::derive(spec.seed, &[scene_idx as u64, rollout_idx as u64]);
    let mut pick = rng::stream(rollout_seed, &[0xe90]);
    let ego: VehicleId =
        scene.trajectories[pick.random_range(0..scene.trajectories.len())].vehicle_id;
    let scenario = scene.with_ego(ego)?;

    let policy = spec.family.policy(value, rng::derive(rollout_seed, &[1]))?;
    let share = ShareOptions {
        pseudonym_seed: rng::derive(rollout_seed, &[2]),
        ..ShareOptions::at_rate(spec.share_rate)
    };
    let streams = emit_shared_stream(&scenario, &policy, spec.pseudonyms, &share)?;
    match evaluate_privacy(&scenario, &streams, &spec.attack) {
        Ok(r) => Ok(Some((r.confusion_rate, r.rmse, r.rmse_matched))),
        Err(AdversaryError::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs `scenes × rollouts_per_scene` rollouts per sweep value.
///
/// Rollout `(scene, r)` draws its ego and its forging seed from the sweep
/// seed alone, so every sweep value sees the same egos. Degenerate rollouts
/// are counted in `skipped`. Results are independent of `jobs`.
pub fn rollout_sweep(
    spec: &SweepSpec,
    values: &[f64],
    jobs: Option<usize>,
) -> Result<Vec<SweepRow>, AdversaryError> {
    if spec.rollouts_per_scene == 0 || spec.scenes == 0 || spec.layouts.is_empty() {
        return Err(AdversaryError::InvalidParameter(
            "sweep needs at least one layout, scene and rollout".into(),
        ));
    }
    let run = || -> Result<Vec<SweepRow>, AdversaryError> {
        let scenes: Vec<Scenario> = (0..spec.scenes)
            .into_par_iter()
            .map(|s| {
                generate_scenario(
                    spec.layouts[s % spec.layouts.len()],
                    spec.vehicles,
                    spec.duration,
                    spec.dt,
                    rng::derive(spec.seed, &[0x5ce7e, s as u64]),
                )
            })
            .collect::<Result<_, _>>()?;

        let per_value = spec.scenes * spec.rollouts_per_scene;
        let outcomes: Vec<Outcome> = (0..values.len() * per_value)
            .into_par_iter()
            .map(|k| {
                let (v, rest) = (k / per_value, k % per_value);
                let (s, r) = (
                    rest / spec.rollouts_per_scene,
                    rest % spec.rollouts_per_scene,
                );
                rollout(spec, &scenes[s], s, r, values[v])
            })
            .collect::<Result<_, _>>()?;

        Ok(values
            .iter()
            .zip(outcomes.chunks(per_value))
            .map(|(&value, chunk)| summarize(value, chunk))
            .collect())
    };

    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| AdversaryError::InvalidParameter(e.to_string()))?
            .install(run),
        None => run(),
    }
}

fn summarize(value: f64, chunk: &[Outcome]) -> SweepRow {
    let done: Vec<_> = chunk.iter().flatten().collect();
    let confusion: Vec<f64> = done.iter().map(|o| o.0).collect();
    let rmse: Vec<f64> = done.iter().map(|o| o.1).collect();
    let matched: Vec<f64> = done.iter().filter_map(|o| o.2).collect();
    let (mean_confusion, sd_confusion) = mean_sd(&confusion);
    let (mean_rmse, sd_rmse) = mean_sd(&rmse);
    SweepRow {
        sigma: value,
        mean_confusion,
        sd_confusion,
        mean_rmse,
        sd_rmse,
        n_rollouts: chunk.len(),
        skipped: chunk.len() - done.len(),
        mean_rmse_matched: mean_sd(&matched).0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepSpec {
        SweepSpec {
            scenes: 3,
            rollouts_per_scene: 4,
            vehicles: 5,
            duration: 5.0,
            ..SweepSpec::default()
        }
    }

    #[test]
    fn counts_rollouts() {
        let rows = rollout_sweep(&small(), &[0.0, 12.0], Some(2)).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.n_rollouts == 12));
    }

    #[test]
    fn zero_noise_near_perfect() {
        let rows = rollout_sweep(&small(), &[0.0], None).unwrap();
        assert!(rows[0].mean_confusion <= 0.05, "{:?}", rows[0]);
        assert_eq!(rows[0].mean_rmse, 0.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let a = rollout_sweep(&small(), &[0.0, 8.0], Some(1)).unwrap();
        let b = rollout_sweep(&small(), &[0.0, 8.0], Some(4)).unwrap();
        assert_eq!(sweep_csv(&a), sweep_csv(&b));
    }

    #[test]
    fn rejects_empty_rollouts() {
        let spec = SweepSpec {
            rollouts_per_scene: 0,
            ..small()
        };
        assert!(rollout_sweep(&spec, &[0.0], None).is_err());
    }
}
