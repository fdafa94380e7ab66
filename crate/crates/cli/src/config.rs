use std::path::{Path, PathBuf};

use rawpriv_core::adversary::{Association, AttackParams, SweepFamily, SweepSpec};
use rawpriv_core::billing::{Money, Tariff};
use rawpriv_core::nvs::CorridorParams;
use rawpriv_core::obfuscation::PseudonymPolicy;
use rawpriv_core::scene::RoadLayout;
use rawpriv_core::scheduler::StackConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PrivacySweep,
    NvsContext,
    Schedule,
    BillingDemo,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::PrivacySweep => "privacy-sweep",
            Experiment::NvsContext => "nvs-context",
            Experiment::Schedule => "schedule",
            Experiment::BillingDemo => "billing-demo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub nvs: NvsSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub billing: BillingSection,
}

fn default_seed() -> u64 {
    2024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub layouts: Vec<RoadLayout>,
    pub scenes: usize,
    pub vehicles: usize,
    pub duration: f64,
    pub dt: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            layouts: RoadLayout::ALL.to_vec(),
            scenes: 20,
            vehicles: 8,
            duration: 20.0,
            dt: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Gaussian,
    FixedOffset,
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub family: FamilyName,
    /// Random-walk step sigma as a fraction of the walk radius.
    pub step_ratio: f64,
    pub share_rate: f64,
    /// Rotate pseudonyms every k frames; absent means constant.
    pub rotate_every: Option<u32>,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            family: FamilyName::Gaussian,
            step_ratio: 0.25,
            share_rate: 10.0,
            rotate_every: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssociationName {
    Nearest,
    Pseudonym,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub sensing_radius: f64,
    pub gate_radius: f64,
    pub association: AssociationName,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            sensing_radius: 100.0,
            gate_radius: 25.0,
            association: AssociationName::Nearest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub values: Vec<f64>,
    pub rollouts_per_scene: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            values: vec![0.0, 2.0, 4.0, 8.0, 12.0, 16.0],
            rollouts_per_scene: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NvsSection {
    pub novel_offset: f64,
    pub context_lengths: Vec<usize>,
    pub corridor: CorridorParams,
}

impl Default for NvsSection {
    fn default() -> Self {
        Self {
            novel_offset: 2.0,
            context_lengths: vec![1, 2, 4, 8],
            corridor: CorridorParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub horizon: f64,
    pub stack: StackConfig,
    pub recipients: u32,
    /// Total demand arrivals per second across recipients.
    pub demand_rate: f64,
    pub elevated_fraction: f64,
    pub network_delay: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            stack: StackConfig::default(),
            recipients: 3,
            demand_rate: 4.0,
            elevated_fraction: 0.1,
            network_delay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BillingSection {
    pub sharers: u32,
    pub recipients: u32,
    pub tariff: Tariff,
}

impl Default for BillingSection {
    fn default() -> Self {
        Self {
            sharers: 5,
            recipients: 5,
            tariff: Tariff {
                unit_cost: Money(100),
                priority_multiplier: 2.0,
                subscription_flat: Money(500),
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::ConfigParse(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    /// Every violated constraint, each prefixed by its field path.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                v.push(msg);
            }
        };
        let s = &self.scenario;
        check(
            !s.layouts.is_empty(),
            "scenario.layouts: must not be empty".into(),
        );
        check(s.scenes >= 1, "scenario.scenes: must be at least 1".into());
        check(
            s.vehicles >= 2,
            format!("scenario.vehicles: need at least 2, got {}", s.vehicles),
        );
        check(
            s.dt > 0.0 && s.dt.is_finite(),
            format!("scenario.dt: must be positive, got {}", s.dt),
        );
        check(
            s.duration.is_finite() && s.duration >= 2.0 * s.dt,
            format!(
                "scenario.duration: must cover two steps of dt, got {}",
                s.duration
            ),
        );

        let p = &self.policy;
        check(
            p.share_rate > 0.0 && p.share_rate * s.dt <= 1.0 + 1e-9,
            format!(
                "policy.share_rate: must lie in (0, 1/dt = {}], got {}",
                1.0 / s.dt,
                p.share_rate
            ),
        );
        check(
            p.step_ratio >= 0.0 && p.step_ratio.is_finite(),
            format!(
                "policy.step_ratio: must be non-negative, got {}",
                p.step_ratio
            ),
        );
        check(
            p.rotate_every != Some(0),
            "policy.rotate_every: must be at least 1".into(),
        );

        let a = &self.attack;
        check(
            a.sensing_radius > 0.0 && a.sensing_radius.is_finite(),
            format!(
                "attack.sensing_radius: must be positive, got {}",
                a.sensing_radius
            ),
        );
        check(
            a.gate_radius > 0.0 && a.gate_radius.is_finite(),
            format!(
                "attack.gate_radius: must be positive, got {}",
                a.gate_radius
            ),
        );

        let w = &self.sweep;
        check(
            !w.values.is_empty(),
            "sweep.values: must not be empty".into(),
        );
        check(
            w.values.iter().all(|x| x.is_finite() && *x >= 0.0),
            "sweep.values: must be finite and non-negative".into(),
        );
        check(
            w.rollouts_per_scene >= 1,
            "sweep.rollouts_per_scene: must be at least 1".into(),
        );

        let n = &self.nvs;
        check(
            n.novel_offset.is_finite(),
            format!("nvs.novel_offset: must be finite, got {}", n.novel_offset),
        );
        check(
            !n.context_lengths.is_empty() && n.context_lengths.iter().all(|&k| k >= 1),
            "nvs.context_lengths: must be a non-empty list of positive counts".into(),
        );
        check(
            n.context_lengths.windows(2).all(|w| w[0] <= w[1]),
            "nvs.context_lengths: must be sorted ascending".into(),
        );
        check(
            n.context_lengths.iter().all(|&k| k <= n.corridor.frames),
            format!(
                "nvs.context_lengths: longest context exceeds nvs.corridor.frames = {}",
                n.corridor.frames
            ),
        );
        let c = &n.corridor;
        check(
            c.focal > 0.0 && c.image_width > 0 && c.image_height > 0,
            "nvs.corridor: CameraIntrinsics needs positive focal and image size".into(),
        );
        check(
            c.density > 0.0 && c.length > 0.0 && c.half_width > 0.0 && c.height > c.camera_height,
            "nvs.corridor: geometry must be positive with the camera below the ceiling".into(),
        );

        let sc = &self.schedule;
        for m in sc.stack.violations() {
            v.push(format!("schedule.stack: {m}"));
        }
        let mut check = |ok: bool, msg: String| {
            if !ok {
                v.push(msg);
            }
        };
        check(
            sc.horizon > 0.0 && sc.horizon.is_finite(),
            format!("schedule.horizon: must be positive, got {}", sc.horizon),
        );
        check(
            sc.recipients >= 1,
            "schedule.recipients: must be at least 1".into(),
        );
        check(
            sc.demand_rate >= 0.0 && sc.demand_rate.is_finite(),
            format!(
                "schedule.demand_rate: must be non-negative, got {}",
                sc.demand_rate
            ),
        );
        check(
            (0.0..=1.0).contains(&sc.elevated_fraction),
            format!(
                "schedule.elevated_fraction: must lie in [0, 1], got {}",
                sc.elevated_fraction
            ),
        );
        check(
            sc.network_delay >= 0.0 && sc.network_delay.is_finite(),
            format!(
                "schedule.network_delay: must be non-negative, got {}",
                sc.network_delay
            ),
        );

        let b = &self.billing;
        check(b.sharers >= 1, "billing.sharers: must be at least 1".into());
        check(
            b.recipients >= 1,
            "billing.recipients: must be at least 1".into(),
        );
        for m in b.tariff.violations() {
            v.push(format!("billing.tariff: {m}"));
        }
        if self.jobs == Some(0) {
            v.push("jobs: must be at least 1".into());
        }
        v
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        let family = match self.policy.family {
            FamilyName::Gaussian => SweepFamily::Gaussian,
            FamilyName::FixedOffset => SweepFamily::FixedOffset,
            FamilyName::RandomWalk => SweepFamily::SmoothedRandomWalk {
                step_ratio: self.policy.step_ratio,
            },
        };
        let association = match self.attack.association {
            AssociationName::Nearest => Association::Nearest {
                gate_radius: self.attack.gate_radius,
            },
            AssociationName::Pseudonym => Association::Pseudonym,
        };
        SweepSpec {
            layouts: self.scenario.layouts.clone(),
            scenes: self.scenario.scenes,
            vehicles: self.scenario.vehicles,
            duration: self.scenario.duration,
            dt: self.scenario.dt,
            rollouts_per_scene: self.sweep.rollouts_per_scene,
            share_rate: self.policy.share_rate,
            attack: AttackParams {
                sensing_radius: self.attack.sensing_radius,
                association,
            },
            family,
            pseudonyms: match self.policy.rotate_every {
                Some(k) => PseudonymPolicy::RotateEveryKFrames { k },
                None => PseudonymPolicy::Constant,
            },
            seed: self.seed,
        }
    }
}

/// Applies `a.b.c=value`. The value is read as a TOML literal when it
/// parses as one and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::ConfigParse(format!("override `{assignment}` lacks `=`")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::ConfigParse(format!("bad override path `{path}`")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let (last, parents) = keys.split_last().expect("non-empty");
    let mut node = table;
    for k in parents {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            CliError::ConfigParse(format!("override `{path}`: `{k}` is not a table"))
        })?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
