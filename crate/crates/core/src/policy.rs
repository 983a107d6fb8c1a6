//! Phase selection rules and the per-intersection decision timer.
//!
//! All argmax selections break ties towards the lowest phase index.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roadnet::{Intersection, Network, Phase};
use crate::sim::{Controller, Decision, World};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("no queue observation for lane {0}")]
    MissingLane(usize),
    #[error("unknown policy `{0}` (expected fixed_time, cyclic, max_queue, efficient_mp or max_state_value)")]
    UnknownPolicy(String),
}

/// Queue length per lane index.
pub type QueueMap = HashMap<usize, f64>;

/// Phase-control policy names accepted in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    FixedTime,
    Cyclic,
    MaxQueue,
    EfficientMp,
    MaxStateValue,
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyName::FixedTime => "fixed_time",
            PolicyName::Cyclic => "cyclic",
            PolicyName::MaxQueue => "max_queue",
            PolicyName::EfficientMp => "efficient_mp",
            PolicyName::MaxStateValue => "max_state_value",
        })
    }
}

impl FromStr for PolicyName {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed_time" => Ok(PolicyName::FixedTime),
            "cyclic" => Ok(PolicyName::Cyclic),
            "max_queue" => Ok(PolicyName::MaxQueue),
            "efficient_mp" => Ok(PolicyName::EfficientMp),
            "max_state_value" => Ok(PolicyName::MaxStateValue),
            _ => Err(PolicyError::UnknownPolicy(s.to_string())),
        }
    }
}

/// How the absolute pressure of an intersection is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureMode {
    /// |Σ_m ep(m)|
    #[default]
    Intersection,
    /// Σ_m |ep(m)|
    PerMovement,
}

/// Decision timer of one intersection.
///
/// `tick` is called once per simulated second. Yellow seconds are consumed
/// first; after that the timer counts green seconds and reports a decision
/// when they reach the committed duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControllerState {
    /// Phase chosen at the last decision; `None` before the first one, when
    /// phase 0 is displayed.
    pub phase: Option<usize>,
    pub committed: u32,
    pub elapsed: u32,
    pub pending_yellow: u32,
    yellow_len: u32,
}

impl ControllerState {
    /// Fresh timer that requests a decision on its first tick.
    pub fn new(yellow_len: u32) -> Self {
        ControllerState { phase: None, committed: 1, elapsed: 0, pending_yellow: 0, yellow_len }
    }

    pub fn displayed_phase(&self) -> usize {
        self.phase.unwrap_or(0)
    }

    /// Advances one second; `true` when a decision is due.
    pub fn tick(&mut self) -> bool {
        if self.pending_yellow > 0 {
            self.pending_yellow -= 1;
            return false;
        }
        self.elapsed += 1;
        self.elapsed >= self.committed
    }

    pub fn commit(&mut self, phase: usize, duration: u32, yellow: bool) {
        self.phase = Some(phase);
        self.committed = duration;
        self.elapsed = 0;
        self.pending_yellow = if yellow { self.yellow_len } else { 0 };
    }
}

/// One second of the two-stage loop for one intersection: when the timer
/// expires, pick the phase, then its duration, and restart the timer.
pub fn two_stage_tick(
    state: &mut ControllerState,
    phase_policy: impl FnOnce(&ControllerState) -> usize,
    duration_agent: impl FnOnce(usize) -> u32,
) -> Option<Decision> {
    if !state.tick() {
        return None;
    }
    let phase = phase_policy(state);
    let duration = duration_agent(phase);
    let changed = phase != state.displayed_phase();
    state.commit(phase, duration, changed && state.yellow_len > 0);
    Some(Decision { phase, duration })
}

/// Index of the first maximum.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Index of the first maximum, treating scores within `tol` of each other as
/// tied.
pub fn argmax_within(scores: &[f64], tol: f64) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] + tol {
            best = i;
        }
    }
    best
}

/// Tie tolerance for scores built from `queues`: rounding in sums and means
/// of lane queues stays far below 1e-9 of the total queue mass.
fn tie_tolerance(queues: &QueueMap) -> f64 {
    1e-9 * queues.values().map(|q| q.abs()).sum::<f64>()
}

fn queue_of(queues: &QueueMap, lane: usize) -> Result<f64, PolicyError> {
    queues.get(&lane).copied().ok_or(PolicyError::MissingLane(lane))
}

/// Σ of queues over each phase's participating lanes.
pub fn phase_queue_sums(queues: &QueueMap, phases: &[Phase]) -> Result<Vec<f64>, PolicyError> {
    phases
        .iter()
        .map(|p| p.participating_lanes.iter().map(|&l| queue_of(queues, l)).sum())
        .collect()
}

pub fn max_queue_phase(queues: &QueueMap, phases: &[Phase]) -> Result<usize, PolicyError> {
    Ok(argmax_within(&phase_queue_sums(queues, phases)?, tie_tolerance(queues)))
}

/// Mean upstream queue minus mean downstream queue of movement `m`.
pub fn movement_pressure(queues: &QueueMap, net: &Network, x: &Intersection, m: usize) -> Result<f64, PolicyError> {
    let mv = &x.movements[m];
    let up: f64 = mv.from_lanes.iter().map(|&l| queue_of(queues, l)).sum::<Result<f64, _>>()?;
    let out = &net.roads[mv.to_road].lanes;
    let down: f64 = out.iter().map(|&l| queue_of(queues, l)).sum::<Result<f64, _>>()?;
    Ok(up / mv.from_lanes.len() as f64 - down / out.len() as f64)
}

pub fn efficient_pressure_scores(queues: &QueueMap, net: &Network, node: usize) -> Result<Vec<f64>, PolicyError> {
    let x = &net.intersections[node];
    x.phases
        .iter()
        .map(|p| p.movements.iter().map(|&m| movement_pressure(queues, net, x, m)).sum())
        .collect()
}

pub fn efficient_pressure_phase(queues: &QueueMap, net: &Network, node: usize) -> Result<usize, PolicyError> {
    Ok(argmax_within(&efficient_pressure_scores(queues, net, node)?, tie_tolerance(queues)))
}

/// Absolute pressure of an intersection over all of its movements.
pub fn intersection_pressure(
    queues: &QueueMap,
    net: &Network,
    node: usize,
    mode: PressureMode,
) -> Result<f64, PolicyError> {
    let x = &net.intersections[node];
    let per: Vec<f64> =
        (0..x.movements.len()).map(|m| movement_pressure(queues, net, x, m)).collect::<Result<_, _>>()?;
    Ok(match mode {
        PressureMode::Intersection => per.iter().sum::<f64>().abs(),
        PressureMode::PerMovement => per.iter().map(|p| p.abs()).sum(),
    })
}

/// Phase whose best duration value is largest; rows are phases.
pub fn max_state_value_phase(q: &[Vec<f64>]) -> usize {
    let values: Vec<f64> = q.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    argmax(&values)
}

/// Next phase in preset order; phase 0 before the first decision.
pub fn cyclic_next(state: &ControllerState, phase_count: usize) -> usize {
    match state.phase {
        None => 0,
        Some(p) => (p + 1) % phase_count,
    }
}

/// Queues of every incoming and outgoing lane of `node`.
pub fn queue_map(world: &World<'_>, node: usize) -> QueueMap {
    let x = &world.network().intersections[node];
    x.incoming_lanes
        .iter()
        .chain(&x.outgoing_lanes)
        .map(|&l| (l, world.lane_queue(l) as f64))
        .collect()
}

/// Phase-control rules that need no learned model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseRule {
    Cyclic,
    MaxQueue,
    EfficientPressure,
}

impl PhaseRule {
    pub fn choose(self, world: &World<'_>, node: usize, last: Option<usize>) -> usize {
        let net = world.network();
        let x = &net.intersections[node];
        match self {
            PhaseRule::Cyclic => last.map_or(0, |p| (p + 1) % x.phases.len()),
            PhaseRule::MaxQueue => {
                max_queue_phase(&queue_map(world, node), &x.phases).expect("queue map covers the intersection")
            }
            PhaseRule::EfficientPressure => {
                efficient_pressure_phase(&queue_map(world, node), net, node).expect("queue map covers the intersection")
            }
        }
    }
}

/// Phase rule with a constant action duration (the M-QL and Efficient-MP
/// baselines, or cyclic control with equal splits).
#[derive(Debug, Clone)]
pub struct RuleController {
    rule: PhaseRule,
    duration: u32,
    last: Vec<Option<usize>>,
}

impl RuleController {
    pub fn new(rule: PhaseRule, duration: u32) -> Self {
        RuleController { rule, duration, last: Vec::new() }
    }
}

impl Controller for RuleController {
    fn decide(&mut self, world: &World<'_>, node: usize) -> Decision {
        if self.last.len() != world.network().intersections.len() {
            self.last = vec![None; world.network().intersections.len()];
        }
        let phase = self.rule.choose(world, node, self.last[node]);
        self.last[node] = Some(phase);
        Decision { phase, duration: self.duration }
    }
}

/// Cycles phases in preset order with fixed green splits.
#[derive(Debug, Clone)]
pub struct FixedTimeController {
    /// Green seconds per phase index; the last entry repeats for phases
    /// beyond the list.
    splits: Vec<u32>,
    last: Vec<Option<usize>>,
}

pub fn fixed_time_controller(splits: Vec<u32>) -> FixedTimeController {
    FixedTimeController::new(splits)
}

impl FixedTimeController {
    pub fn new(splits: Vec<u32>) -> Self {
        assert!(!splits.is_empty() && splits.iter().all(|&s| s > 0), "fixed-time splits must be positive");
        FixedTimeController { splits, last: Vec::new() }
    }

    pub fn uniform(seconds: u32) -> Self {
        Self::new(vec![seconds])
    }

    fn split(&self, phase: usize) -> u32 {
        *self.splits.get(phase).unwrap_or_else(|| self.splits.last().expect("non-empty"))
    }
}

impl Controller for FixedTimeController {
    fn decide(&mut self, world: &World<'_>, node: usize) -> Decision {
        let n = world.network().intersections.len();
        if self.last.len() != n {
            self.last = vec![None; n];
        }
        let phases = world.network().intersections[node].phases.len();
        let phase = self.last[node].map_or(0, |p| (p + 1) % phases);
        self.last[node] = Some(phase);
        Decision { phase, duration: self.split(phase) }
    }
}
