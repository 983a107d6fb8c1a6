use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::ParamStore;
use crate::policy::max_state_value_phase;
use crate::roadnet::Network;
use crate::sim::{Controller, Decision, World};

use super::learn::select_duration;
use super::model::QModel;
use super::replay::Transition;
use super::state::{compute_reward, extract_state, phase_lane_table, DurationState};
use super::{ControlSettings, PhasePolicy, RewardTiming};

#[derive(Debug, Clone)]
struct NodeMemory {
    phase_lanes: Arc<Vec<Vec<usize>>>,
    last_phase: Option<usize>,
    /// State and action of the decision whose outcome is not yet known.
    pending: Option<(DurationState, usize)>,
    reward_sum: f64,
    reward_steps: u32,
}

/// Two-stage controller: a phase policy picks the phase, the Q-network its
/// green duration. With `learn` set it records one transition per decision
/// once the following decision reveals the next state.
pub struct AgentController<'a> {
    model: &'a QModel,
    params: &'a ParamStore,
    settings: &'a ControlSettings,
    epsilon: f64,
    rng: ChaCha8Rng,
    learn: bool,
    nodes: Vec<NodeMemory>,
    transitions: Vec<Transition>,
}

impl<'a> AgentController<'a> {
    pub fn new(
        net: &Network,
        model: &'a QModel,
        params: &'a ParamStore,
        settings: &'a ControlSettings,
        epsilon: f64,
        seed: u64,
        learn: bool,
    ) -> Self {
        let nodes = net
            .intersections
            .iter()
            .map(|x| NodeMemory {
                phase_lanes: phase_lane_table(x),
                last_phase: None,
                pending: None,
                reward_sum: 0.0,
                reward_steps: 0,
            })
            .collect();
        AgentController {
            model,
            params,
            settings,
            epsilon,
            rng: ChaCha8Rng::seed_from_u64(seed),
            learn,
            nodes,
            transitions: Vec::new(),
        }
    }

    /// Completed transitions in decision order. Decisions still awaiting
    /// their next state are dropped.
    pub fn take_transitions(&mut self) -> Vec<Transition> {
        std::mem::take(&mut self.transitions)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }
}

impl Controller for AgentController<'_> {
    fn decide(&mut self, world: &World<'_>, node: usize) -> Decision {
        let x = &world.network().intersections[node];
        let obs = world.observe(node);
        let mem = &mut self.nodes[node];
        let mut state = extract_state(&obs, x, mem.phase_lanes.clone(), 0).expect("observation covers the intersection");

        let (phase, q) = match self.settings.phase_policy {
            PhasePolicy::Rule(rule) => {
                let phase = rule.choose(world, node, mem.last_phase);
                state.phase = phase;
                (phase, self.model.q_values(self.params, &state))
            }
            PhasePolicy::MaxStateValue => {
                let mut table = self.model.q_table(self.params, &state);
                let phase = max_state_value_phase(&table);
                state.phase = phase;
                (phase, table.swap_remove(phase))
            }
        };

        if self.learn {
            if let Some((prev, action)) = mem.pending.take() {
                let reward = match self.settings.timing {
                    RewardTiming::Average if mem.reward_steps > 0 => mem.reward_sum / mem.reward_steps as f64,
                    _ => compute_reward(world, node, self.settings.reward, self.settings.pressure_mode),
                };
                self.transitions.push(Transition {
                    node,
                    state: prev,
                    action,
                    reward,
                    next_state: state.clone(),
                    terminal: false,
                });
            }
            mem.reward_sum = 0.0;
            mem.reward_steps = 0;
        }

        let (action, duration) = select_duration(&q, self.epsilon, &self.settings.durations, &mut self.rng);
        if self.learn {
            mem.pending = Some((state, action));
        }
        mem.last_phase = Some(phase);
        Decision { phase, duration }
    }

    fn after_step(&mut self, world: &World<'_>) {
        if !self.learn || self.settings.timing != RewardTiming::Average {
            return;
        }
        for (node, mem) in self.nodes.iter_mut().enumerate() {
            if mem.pending.is_some() {
                mem.reward_sum += compute_reward(world, node, self.settings.reward, self.settings.pressure_mode);
                mem.reward_steps += 1;
            }
        }
    }
}
