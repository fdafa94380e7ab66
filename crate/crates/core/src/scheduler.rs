//! Duty-cycled swap between a proprietary and an open processing stack on
//! one sensor.
//!
//! The sensor runs on a fixed grid of `proprietary_period`. Grid slots that
//! fall on a multiple of `open_period` run the open stack instead, so the
//! proprietary rate drops (15 Hz, not 20 Hz, with the defaults). An elevated
//! demand turns the next grid slot at or after its time into an open slot.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obfuscation::{Priority, StackTag};
use crate::rng;
use crate::scene::VehicleId;

/// Slack for grid-time comparisons.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("no open slot at or after t = {0} s within the horizon")]
    NoOpenSlot(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StackConfig {
    pub proprietary_period: f64,
    /// `f64::INFINITY` disables periodic open slots.
    pub open_period: f64,
    pub swap_latency: f64,
    pub compute_budget: f64,
    pub e2e_deadline: f64,
    pub proprietary_duration: f64,
    pub open_duration: f64,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            proprietary_period: 0.050,
            open_period: 0.200,
            swap_latency: 0.0,
            compute_budget: 1.0,
            e2e_deadline: 0.100,
            proprietary_duration: 0.030,
            open_duration: 0.040,
        }
    }
}

impl StackConfig {
    /// Every violated parameter constraint, each naming its field.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut positive = |name: &str, v: f64, allow_inf: bool| {
            if !(v > 0.0) || (!allow_inf && !v.is_finite()) {
                out.push(format!(
                    "StackConfig.{name} must be positive and finite, got {v}"
                ));
            }
        };
        positive("proprietary_period", self.proprietary_period, false);
        positive("open_period", self.open_period, true);
        positive("e2e_deadline", self.e2e_deadline, false);
        positive("proprietary_duration", self.proprietary_duration, false);
        positive("open_duration", self.open_duration, false);
        if !(self.swap_latency >= 0.0 && self.swap_latency.is_finite()) {
            out.push(format!(
                "StackConfig.swap_latency must be non-negative, got {}",
                self.swap_latency
            ));
        }
        if !(self.compute_budget > 0.0 && self.compute_budget <= 1.0) {
            out.push(format!(
                "StackConfig.compute_budget must lie in (0, 1], got {}",
                self.compute_budget
            ));
        }
        if self.open_period < self.proprietary_period {
            out.push(format!(
                "StackConfig.open_period ({}) is shorter than proprietary_period ({})",
                self.open_period, self.proprietary_period
            ));
        }
        out
    }

    pub fn duration(&self, stack: StackTag) -> f64 {
        match stack {
            StackTag::Open => self.open_duration,
            StackTag::Proprietary => self.proprietary_duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSlot {
    pub start: f64,
    pub duration: f64,
    pub stack: StackTag,
    pub swap_overhead_before: f64,
}

impl ScheduleSlot {
    /// Overhead runs first, then processing.
    pub fn completion(&self) -> f64 {
        self.start + self.swap_overhead_before + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandRequest {
    pub t: f64,
    pub recipient: VehicleId,
    pub priority: Priority,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServedRequest {
    pub recipient: VehicleId,
    pub priority: Priority,
    pub requested_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// Completion time of the slot.
    pub t_produced: f64,
    pub stack: StackTag,
    pub served_requests: Vec<ServedRequest>,
    /// Capture-to-output latency of the slot, swap overhead included.
    pub e2e_latency: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameLedger {
    pub frames: Vec<FrameRecord>,
    /// Requests with no open slot left in the horizon.
    pub unserved: Vec<DemandRequest>,
}

impl FrameLedger {
    pub fn served_count(&self) -> usize {
        self.frames.iter().map(|f| f.served_requests.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRates {
    pub proprietary_hz: f64,
    pub open_hz: f64,
    pub swap_count: usize,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub config: StackConfig,
    pub horizon: f64,
    pub slots: Vec<ScheduleSlot>,
    pub ledger: FrameLedger,
}

fn grid_count(horizon: f64, period: f64) -> usize {
    (horizon / period - GRID_EPS).ceil().max(0.0) as usize
}

fn on_open_cycle(start: f64, open_period: f64) -> bool {
    if !open_period.is_finite() {
        return false;
    }
    let m = (start / open_period).round();
    (start - m * open_period).abs() <= GRID_EPS
}

/// Builds the slot sequence and serves demands from open slots.
///
/// Each request goes to the first open slot starting at or after its time.
pub fn build_timeline(
    config: &StackConfig,
    demands: &[DemandRequest],
    horizon: f64,
) -> Result<Timeline, ScheduleError> {
    let mut problems = config.violations();
    if !(horizon > 0.0 && horizon.is_finite()) {
        problems.push(format!(
            "horizon must be positive and finite, got {horizon}"
        ));
    }
    if let Some(d) = demands.iter().find(|d| !(0.0..horizon).contains(&d.t)) {
        problems.push(format!("demand at t = {} lies outside [0, {horizon})", d.t));
    }
    if demands.windows(2).any(|w| w[1].t < w[0].t) {
        problems.push("demands are not time-sorted".into());
    }
    if !problems.is_empty() {
        return Err(ScheduleError::InvalidConfig(problems));
    }

    let period = config.proprietary_period;
    let n = grid_count(horizon, period);
    let mut open: Vec<bool> = (0..n)
        .map(|k| on_open_cycle(k as f64 * period, config.open_period))
        .collect();
    for d in demands.iter().filter(|d| d.priority == Priority::Elevated) {
        let k = (d.t / period - GRID_EPS).ceil().max(0.0) as usize;
        if k < n {
            open[k] = true;
        }
    }

    let mut slots = Vec::with_capacity(n);
    for (k, &is_open) in open.iter().enumerate() {
        let stack = if is_open {
            StackTag::Open
        } else {
            StackTag::Proprietary
        };
        let overhead = match slots.last() {
            Some(ScheduleSlot { stack: prev, .. }) if *prev != stack => config.swap_latency,
            _ => 0.0,
        };
        let slot = ScheduleSlot {
            start: k as f64 * period,
            duration: config.duration(stack),
            stack,
            swap_overhead_before: overhead,
        };
        if slot.swap_overhead_before + slot.duration > period + GRID_EPS {
            return Err(ScheduleError::Infeasible(format!(
                "deadline: {stack:?} slot at t = {} needs {} s (overhead {} + processing {}) \
                 but the grid period is {period} s",
                slot.start,
                slot.swap_overhead_before + slot.duration,
                slot.swap_overhead_before,
                slot.duration
            )));
        }
        slots.push(slot);
    }

    let utilization = busy_time(&slots) / horizon;
    if utilization > config.compute_budget + GRID_EPS {
        return Err(ScheduleError::Infeasible(format!(
            "compute budget: utilization {utilization} exceeds {}",
            config.compute_budget
        )));
    }

    let mut frames: Vec<FrameRecord> = slots
        .iter()
        .map(|s| FrameRecord {
            t_produced: s.completion(),
            stack: s.stack,
            served_requests: Vec::new(),
            e2e_latency: s.swap_overhead_before + s.duration,
        })
        .collect();
    let mut unserved = Vec::new();
    for d in demands {
        match first_open_at_or_after(&slots, d.t) {
            Some(i) => frames[i].served_requests.push(ServedRequest {
                recipient: d.recipient,
                priority: d.priority,
                requested_at: d.t,
            }),
            None => unserved.push(*d),
        }
    }

    Ok(Timeline {
        config: *config,
        horizon,
        slots,
        ledger: FrameLedger { frames, unserved },
    })
}

fn busy_time(slots: &[ScheduleSlot]) -> f64 {
    slots
        .iter()
        .map(|s| s.duration + s.swap_overhead_before)
        .sum()
}

fn first_open_at_or_after(slots: &[ScheduleSlot], t: f64) -> Option<usize> {
    let from = slots.partition_point(|s| s.start < t - GRID_EPS);
    (from..slots.len()).find(|&i| slots[i].stack == StackTag::Open)
}

impl Timeline {
    pub fn effective_rates(&self) -> EffectiveRates {
        let open = self
            .slots
            .iter()
            .filter(|s| s.stack == StackTag::Open)
            .count();
        EffectiveRates {
            proprietary_hz: (self.slots.len() - open) as f64 / self.horizon,
            open_hz: open as f64 / self.horizon,
            swap_count: self
                .slots
                .windows(2)
                .filter(|w| w[0].stack != w[1].stack)
                .count(),
            utilization: busy_time(&self.slots) / self.horizon,
        }
    }

    /// Latency from request to delivery through the first open slot at or
    /// after `request.t`, plus `network_delay`; second value is whether it
    /// meets the configured deadline.
    pub fn e2e_latency(
        &self,
        request: &DemandRequest,
        network_delay: f64,
    ) -> Result<(f64, bool), ScheduleError> {
        let i = first_open_at_or_after(&self.slots, request.t)
            .ok_or(ScheduleError::NoOpenSlot(request.t))?;
        let latency = self.slots[i].completion() - request.t + network_delay;
        Ok((latency, latency <= self.config.e2e_deadline + GRID_EPS))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("start,duration,stack,overhead\n");
        for s in &self.slots {
            let stack = match s.stack {
                StackTag::Open => "open",
                StackTag::Proprietary => "proprietary",
            };
            out.push_str(&format!(
                "{},{},{stack},{}\n",
                s.start, s.duration, s.swap_overhead_before
            ));
        }
        out
    }
}

/// Poisson demand arrivals at `rate` Hz over `[0, horizon)`, recipients drawn
/// uniformly from `recipients`, each elevated with probability
/// `elevated_fraction`. Time-sorted.
pub fn random_demands(
    rate: f64,
    horizon: f64,
    recipients: &[VehicleId],
    elevated_fraction: f64,
    seed: u64,
) -> Vec<DemandRequest> {
    let Ok(gap) = Exp::new(rate) else {
        return Vec::new();
    };
    if recipients.is_empty() || !(rate > 0.0) {
        return Vec::new();
    }
    let p = elevated_fraction.clamp(0.0, 1.0);
    let mut r = rng::stream(seed, &[0xd3a4d]);
    let mut out = Vec::new();
    let mut t: f64 = gap.sample(&mut r);
    while t < horizon {
        out.push(DemandRequest {
            t,
            recipient: recipients[r.random_range(0..recipients.len())],
            priority: if r.random_bool(p) {
                Priority::Elevated
            } else {
                Priority::Normal
            },
        });
        t += gap.sample(&mut r);
    }
    out
}
