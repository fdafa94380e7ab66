//! Forged shared poses and pseudonyms.
//!
//! A sharer never reveals its true pose: every outgoing [`SharedFrame`]
//! carries a pose produced by [`forge_pose`] under an [`ObfuscationPolicy`],
//! tagged with a pseudonym from [`assign_pseudonym`].

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, mix64};
use crate::scene::{Pose, Scenario, VehicleId};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("{field} must be finite and non-negative, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("pseudonym rotation period must be at least 1 frame")]
    ZeroRotation,
    #[error("share rate {rate} Hz must be positive and at most the scenario frame rate {max} Hz")]
    ShareRate { rate: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyKind {
    None,
    /// Independent `N(0, sigma²)` on x and y every frame.
    Gaussian {
        sigma: f64,
    },
    /// Offset of fixed length, direction redrawn per pseudonym lifetime.
    FixedOffset {
        radius: f64,
    },
    /// Offset performs a Gaussian random walk clipped to a disc.
    SmoothedRandomWalk {
        step_sigma: f64,
        max_radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObfuscationPolicy {
    #[serde(flatten)]
    kind: PolicyKind,
    seed: u64,
}

impl ObfuscationPolicy {
    pub fn new(kind: PolicyKind, seed: u64) -> Result<Self, PolicyError> {
        let check = |field: &'static str, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(PolicyError::Negative { field, value })
            }
        };
        match kind {
            PolicyKind::None => {}
            PolicyKind::Gaussian { sigma } => check("sigma", sigma)?,
            PolicyKind::FixedOffset { radius } => check("radius", radius)?,
            PolicyKind::SmoothedRandomWalk {
                step_sigma,
                max_radius,
            } => {
                check("step_sigma", step_sigma)?;
                check("max_radius", max_radius)?;
            }
        }
        Ok(Self { kind, seed })
    }

    pub fn none() -> Self {
        Self {
            kind: PolicyKind::None,
            seed: 0,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self, PolicyError> {
        Self::new(PolicyKind::Gaussian { sigma }, seed)
    }

    pub fn fixed_offset(radius: f64, seed: u64) -> Result<Self, PolicyError> {
        Self::new(PolicyKind::FixedOffset { radius }, seed)
    }

    pub fn random_walk(step_sigma: f64, max_radius: f64, seed: u64) -> Result<Self, PolicyError> {
        Self::new(
            PolicyKind::SmoothedRandomWalk {
                step_sigma,
                max_radius,
            },
            seed,
        )
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same policy, different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PseudonymPolicy {
    Constant,
    RotateEveryKFrames { k: u32 },
}

impl PseudonymPolicy {
    pub fn rotate_every(k: u32) -> Result<Self, PolicyError> {
        if k == 0 {
            return Err(PolicyError::ZeroRotation);
        }
        Ok(Self::RotateEveryKFrames { k })
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match self {
            PseudonymPolicy::RotateEveryKFrames { k: 0 } => Err(PolicyError::ZeroRotation),
            _ => Ok(()),
        }
    }

    fn epoch(&self, frame_index: u64) -> u64 {
        match *self {
            PseudonymPolicy::Constant => 0,
            PseudonymPolicy::RotateEveryKFrames { k } => frame_index / u64::from(k.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pseudonym(pub u64);

impl fmt::Display for Pseudonym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Pseudonym token for `sharer` at `frame_index`.
///
/// The token is a keyed bijection of `(sharer, epoch)`, so two sharers can
/// never hold the same token under one seed.
pub fn assign_pseudonym(
    policy: PseudonymPolicy,
    seed: u64,
    sharer: VehicleId,
    frame_index: u64,
) -> Pseudonym {
    let epoch = policy.epoch(frame_index) & 0xffff_ffff;
    let packed = (u64::from(sharer.0) << 32) | epoch;
    Pseudonym(mix64(packed ^ mix64(seed)))
}

/// Timestamp in whole microseconds; the wire resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Micros(pub u64);

impl Micros {
    pub fn from_secs(secs: f64) -> Self {
        debug_assert!(secs >= 0.0 && secs.is_finite());
        Micros((secs * 1e6).round() as u64)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 * 1e-6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Priority {
    Normal,
    Elevated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StackTag {
    Open,
    Proprietary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorKind {
    Camera,
    Lidar,
    Radar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadDescriptor {
    pub sensor_kind: SensorKind,
    pub nominal_rate: f32,
    pub size_bytes: u32,
}

impl Default for PayloadDescriptor {
    fn default() -> Self {
        // one 640x480 RGB frame
        Self {
            sensor_kind: SensorKind::Camera,
            nominal_rate: 10.0,
            size_bytes: 640 * 480 * 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedFrame {
    pub pseudonym: Pseudonym,
    pub t: Micros,
    pub forged_pose: Pose,
    pub payload: PayloadDescriptor,
    pub priority: Priority,
    pub stack_tag: StackTag,
}

/// Per-sharer forging state.
#[derive(Debug, Clone)]
pub struct SharerState {
    key: u64,
    lifetime: Option<Pseudonym>,
    direction: f64,
    walk: (f64, f64),
}

impl SharerState {
    pub fn new(policy: &ObfuscationPolicy, sharer: VehicleId) -> Self {
        let key = rng::derive(policy.seed, &[u64::from(sharer.0)]);
        let mut state = Self {
            key,
            lifetime: None,
            direction: 0.0,
            walk: (0.0, 0.0),
        };
        state.direction = state.draw_direction(0);
        state
    }

    /// Starts a new pseudonym lifetime; fixed offsets pick a fresh direction.
    pub fn begin_lifetime(&mut self, pseudonym: Pseudonym) {
        if self.lifetime != Some(pseudonym) {
            self.lifetime = Some(pseudonym);
            self.direction = self.draw_direction(pseudonym.0);
        }
    }

    pub fn walk_offset(&self) -> (f64, f64) {
        self.walk
    }

    fn draw_direction(&self, lifetime: u64) -> f64 {
        let mut r = rng::stream(self.key, &[0xd1ec, lifetime]);
        r.random_range(-std::f64::consts::PI..std::f64::consts::PI)
    }

    fn normal_pair(&self, frame_index: u64) -> (f64, f64) {
        let mut r = rng::stream(self.key, &[0x6a05, frame_index]);
        (StandardNormal.sample(&mut r), StandardNormal.sample(&mut r))
    }
}

/// Forges the pose shared at `frame_index`. Only x and y are perturbed.
pub fn forge_pose(
    policy: &ObfuscationPolicy,
    true_pose: Pose,
    frame_index: u64,
    state: &mut SharerState,
) -> Pose {
    match policy.kind {
        PolicyKind::None => true_pose,
        PolicyKind::Gaussian { sigma } => {
            if sigma == 0.0 {
                return true_pose;
            }
            let (nx, ny) = state.normal_pair(frame_index);
            true_pose.translated(sigma * nx, sigma * ny)
        }
        PolicyKind::FixedOffset { radius } => {
            let (s, c) = state.direction.sin_cos();
            true_pose.translated(radius * c, radius * s)
        }
        PolicyKind::SmoothedRandomWalk {
            step_sigma,
            max_radius,
        } => {
            let (nx, ny) = state.normal_pair(frame_index);
            let (mut ox, mut oy) = (
                state.walk.0 + step_sigma * nx,
                state.walk.1 + step_sigma * ny,
            );
            let norm = ox.hypot(oy);
            if norm > max_radius {
                let scale = max_radius / norm;
                ox *= scale;
                oy *= scale;
                // the rescaled norm can round one ulp above the bound
                while ox.hypot(oy) > max_radius {
                    ox *= 1.0 - f64::EPSILON;
                    oy *= 1.0 - f64::EPSILON;
                }
            }
            state.walk = (ox, oy);
            true_pose.translated(ox, oy)
        }
    }
}

/// One sharer's outgoing frames, time-ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharerStream {
    pub sharer: VehicleId,
    pub frames: Vec<SharedFrame>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShareOptions {
    pub share_rate: f64,
    pub payload: PayloadDescriptor,
    pub priority: Priority,
    /// Seeds the pseudonym keyspace.
    pub pseudonym_seed: u64,
}

impl ShareOptions {
    pub fn at_rate(share_rate: f64) -> Self {
        Self {
            share_rate,
            payload: PayloadDescriptor {
                nominal_rate: share_rate as f32,
                ..PayloadDescriptor::default()
            },
            priority: Priority::Normal,
            pseudonym_seed: 0,
        }
    }
}

/// Sample indices shared at `share_rate`: instant `k / share_rate` maps to
/// the nearest scenario sample.
pub fn share_schedule(scenario: &Scenario, share_rate: f64) -> Result<Vec<usize>, PolicyError> {
    let frame_rate = 1.0 / scenario.dt;
    if !(share_rate > 0.0 && share_rate <= frame_rate * (1.0 + 1e-9)) {
        return Err(PolicyError::ShareRate {
            rate: share_rate,
            max: frame_rate,
        });
    }
    let count = (scenario.duration * share_rate + 1e-9).floor() as usize;
    let last = scenario.sample_count() - 1;
    Ok((0..count)
        .map(|k| ((k as f64 / (share_rate * scenario.dt)).round() as usize).min(last))
        .collect())
}

/// Produces every sharer's frame stream. The ego vehicle emits nothing.
pub fn emit_shared_stream(
    scenario: &Scenario,
    policy: &ObfuscationPolicy,
    pseudonyms: PseudonymPolicy,
    opts: &ShareOptions,
) -> Result<Vec<SharerStream>, PolicyError> {
    pseudonyms.validate()?;
    let schedule = share_schedule(scenario, opts.share_rate)?;
    Ok(scenario
        .sharers()
        .map(|tr| {
            let mut state = SharerState::new(policy, tr.vehicle_id);
            let frames = schedule
                .iter()
                .enumerate()
                .map(|(k, &sample)| {
                    let k = k as u64;
                    let pseudonym =
                        assign_pseudonym(pseudonyms, opts.pseudonym_seed, tr.vehicle_id, k);
                    state.begin_lifetime(pseudonym);
                    SharedFrame {
                        pseudonym,
                        t: Micros::from_secs(scenario.time(sample)),
                        forged_pose: forge_pose(policy, tr.poses[sample], k, &mut state),
                        payload: opts.payload,
                        priority: opts.priority,
                        stack_tag: StackTag::Open,
                    }
                })
                .collect();
            SharerStream {
                sharer: tr.vehicle_id,
                frames,
            }
        })
        .collect())
}
