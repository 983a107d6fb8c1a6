use crate::flow::FlowSet;
use crate::policy::ControllerState;
use crate::roadnet::Network;

use super::log::{DecisionRecord, EpisodeLog, VehicleRecord};
use super::{SimConfig, SimError, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub phase: usize,
    /// Green seconds.
    pub duration: u32,
}

/// Signal controller driven by per-intersection timers.
pub trait Controller {
    /// Called when the green of `node` has run for its committed duration.
    fn decide(&mut self, world: &World<'_>, node: usize) -> Decision;

    /// Called after every simulation step.
    fn after_step(&mut self, _world: &World<'_>) {}

    /// Called once when the episode ends, before the log is assembled.
    fn finish(&mut self, _world: &World<'_>) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    /// Seconds of demand; vehicles starting later never enter.
    pub horizon: u32,
    /// Keep stepping after `horizon` until the network is empty.
    pub drain: bool,
    /// Draining stops with [`SimError::DrainTimeout`] at
    /// `drain_cap_factor * horizon`.
    pub drain_cap_factor: u32,
    pub sim: SimConfig,
}

impl EpisodeOptions {
    pub fn new(horizon: u32, drain: bool) -> Self {
        EpisodeOptions { horizon, drain, drain_cap_factor: 4, sim: SimConfig::default() }
    }
}

/// Runs one episode: at every second each intersection's timer ticks, due
/// intersections ask `controller` for a decision, then the world steps.
pub fn run_episode(
    net: &Network,
    flow: &FlowSet,
    controller: &mut dyn Controller,
    opts: &EpisodeOptions,
) -> Result<EpisodeLog, SimError> {
    if opts.horizon == 0 {
        return Err(SimError::Config("horizon must be positive".into()));
    }
    let mut world = World::new(net, flow, opts.sim, opts.horizon)?;
    let n = net.intersections.len();
    let mut timers = vec![ControllerState::new(opts.sim.yellow); n];
    let mut decisions = Vec::new();
    let mut queue_totals = Vec::with_capacity(opts.horizon as usize);
    let cap = opts.horizon.saturating_mul(opts.drain_cap_factor.max(1));

    loop {
        let now = world.clock();
        if now >= opts.horizon && (!opts.drain || world.is_drained()) {
            break;
        }
        if now >= cap {
            return Err(SimError::DrainTimeout { stranded: world.counts().in_network, cap });
        }
        for (node, timer) in timers.iter_mut().enumerate() {
            if !timer.tick() {
                continue;
            }
            let d = controller.decide(&world, node);
            if d.duration == 0 {
                return Err(SimError::InvalidDuration(0));
            }
            let yellow = world.set_phase(node, d.phase)?;
            timer.commit(d.phase, d.duration, yellow);
            decisions.push(DecisionRecord { time: now, intersection: node, phase: d.phase, duration: d.duration, yellow });
        }
        world.step();
        queue_totals.push((0..n).map(|i| world.intersection_queue(i)).collect());
        controller.after_step(&world);
    }
    controller.finish(&world);

    let specs = flow.vehicles();
    Ok(EpisodeLog {
        horizon: opts.horizon,
        end_time: world.clock(),
        intersections: net.intersections.iter().map(|x| x.id.clone()).collect(),
        vehicles: world
            .vehicles()
            .iter()
            .map(|v| VehicleRecord { id: specs[v.spec].id.clone(), enter_time: v.enter_time, exit_time: v.exit_time })
            .collect(),
        decisions,
        queue_totals,
    })
}
