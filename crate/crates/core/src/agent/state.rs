use std::sync::Arc;

use crate::policy::{intersection_pressure, queue_map, PressureMode};
use crate::roadnet::Intersection;
use crate::sim::{LaneObservation, World, SEGMENTS};

use super::{AgentError, RewardKind};

/// Observation handed to the duration network.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationState {
    /// Vehicles per 100 m band, one row per incoming lane of the
    /// intersection (in `incoming_lanes` order).
    pub segments: Vec<[f64; SEGMENTS]>,
    /// Rows of `segments` that participate in each phase.
    pub phase_lanes: Arc<Vec<Vec<usize>>>,
    /// Phase picked by the phase policy.
    pub phase: usize,
}

impl DurationState {
    pub fn phase_count(&self) -> usize {
        self.phase_lanes.len()
    }

    /// Segment rows of the lanes of `phase`.
    pub fn lanes_of(&self, phase: usize) -> impl Iterator<Item = &[f64; SEGMENTS]> {
        self.phase_lanes[phase].iter().map(|&i| &self.segments[i])
    }

    pub fn with_phase(&self, phase: usize) -> Self {
        DurationState { phase, ..self.clone() }
    }
}

/// Positions in `incoming_lanes` of each phase's participating lanes.
pub fn phase_lane_table(x: &Intersection) -> Arc<Vec<Vec<usize>>> {
    Arc::new(
        x.phases
            .iter()
            .map(|p| {
                p.participating_lanes
                    .iter()
                    .map(|l| x.incoming_lanes.iter().position(|m| m == l).expect("participating lanes are incoming"))
                    .collect()
            })
            .collect(),
    )
}

/// Packs the band counts of `x`'s incoming lanes. `obs` may be in any order.
pub fn extract_state(
    obs: &[LaneObservation],
    x: &Intersection,
    phase_lanes: Arc<Vec<Vec<usize>>>,
    phase: usize,
) -> Result<DurationState, AgentError> {
    if phase >= phase_lanes.len() {
        return Err(AgentError::Config(format!("phase {phase} out of range")));
    }
    let segments = x
        .incoming_lanes
        .iter()
        .map(|&l| {
            let o = obs.iter().find(|o| o.lane == l).ok_or(AgentError::MissingLane(l))?;
            Ok(o.segments.map(f64::from))
        })
        .collect::<Result<Vec<_>, AgentError>>()?;
    Ok(DurationState { segments, phase_lanes, phase })
}

/// Reward of intersection `node` in the current world state.
pub fn compute_reward(world: &World<'_>, node: usize, kind: RewardKind, mode: PressureMode) -> f64 {
    match kind {
        RewardKind::Queue => -(world.intersection_queue(node) as f64),
        RewardKind::Pressure => {
            -intersection_pressure(&queue_map(world, node), world.network(), node, mode).expect("queue map covers node")
        }
    }
}
