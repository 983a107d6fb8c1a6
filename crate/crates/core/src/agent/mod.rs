//! Duration agents: a Q-network scores the seven candidate green durations
//! of the phase chosen by a phase-control policy.

mod controller;
mod learn;
mod model;
mod replay;
mod state;
mod training;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::NnError;
use crate::policy::{PhaseRule, PolicyName, PressureMode};
use crate::sim::SimError;

pub use controller::AgentController;
pub use learn::{epsilon_for_episode, select_duration, train_round};
pub use model::{AgentKind, Fusion, ModelConfig, NetworkVariant, QModel, ACTIONS, HIDDEN, MAX_CONCAT_LANES};
pub use replay::{ReplayBuffer, Transition};
pub use state::{compute_reward, extract_state, phase_lane_table, DurationState};
pub use training::{evaluate, load_transfer, run_training, EpisodeMetrics, TrainingConfig, TrainingOutcome};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no observation for lane {0}")]
    MissingLane(usize),
    #[error("phase {0} has no participating lanes")]
    EmptyPhase(usize),
    #[error("phase {phase} has {lanes} lanes; concatenation fusion supports at most {max}")]
    TooManyLanes { phase: usize, lanes: usize, max: usize },
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub lr: f64,
    pub batch: usize,
    pub sample_size: usize,
    /// Passes over each round's sample.
    pub fit_passes: usize,
    pub gamma: f64,
    /// Multiplier on rewards inside TD targets; keeps Q-values near unit
    /// scale without changing the optimal policy.
    pub reward_scale: f64,
    pub epochs: usize,
    pub patience: usize,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    /// Candidate green durations in seconds, ascending.
    pub durations: Vec<u32>,
    pub replay_capacity: usize,
    /// Simulated seconds of demand per training episode.
    pub episode_seconds: u32,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lr: 0.001,
            batch: 20,
            sample_size: 3000,
            fit_passes: 5,
            gamma: 0.8,
            reward_scale: 0.05,
            epochs: 80,
            patience: 10,
            epsilon_start: 0.8,
            epsilon_decay: 0.95,
            epsilon_floor: 0.05,
            durations: vec![10, 15, 20, 25, 30, 35, 40],
            replay_capacity: 12000,
            episode_seconds: 3600,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.batch == 0 || self.sample_size == 0 || self.replay_capacity == 0 || self.fit_passes == 0 {
            return bad("batch, sample_size, fit_passes and replay_capacity must be positive");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.epochs == 0 || self.episode_seconds == 0 {
            return bad("epochs and episode_seconds must be positive");
        }
        for e in [self.epsilon_start, self.epsilon_decay, self.epsilon_floor] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon settings must lie in [0, 1]");
            }
        }
        if self.durations.len() != ACTIONS {
            return bad("exactly 7 durations are required");
        }
        if self.durations[0] == 0 || self.durations.windows(2).any(|w| w[0] >= w[1]) {
            return bad("durations must be positive and strictly ascending");
        }
        Ok(())
    }
}

/// How the phase is chosen before the agent picks its duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhasePolicy {
    Rule(PhaseRule),
    /// Phase whose best duration value under the agent's own network is
    /// largest.
    MaxStateValue,
}

impl PhasePolicy {
    pub fn from_name(name: PolicyName) -> Result<Self, AgentError> {
        Ok(match name {
            PolicyName::Cyclic => PhasePolicy::Rule(PhaseRule::Cyclic),
            PolicyName::MaxQueue => PhasePolicy::Rule(PhaseRule::MaxQueue),
            PolicyName::EfficientMp => PhasePolicy::Rule(PhaseRule::EfficientPressure),
            PolicyName::MaxStateValue => PhasePolicy::MaxStateValue,
            PolicyName::FixedTime => return Err(AgentError::Config("fixed_time cannot drive an agent".into())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// Negative total queue on the incoming lanes.
    #[default]
    Queue,
    /// Negative absolute intersection pressure.
    Pressure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardTiming {
    /// Sampled once, when the next state is observed.
    #[default]
    NextDecision,
    /// Mean of the per-second rewards over the action.
    Average,
}

/// Everything that shapes the agent's interaction with the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSettings {
    pub phase_policy: PhasePolicy,
    pub reward: RewardKind,
    pub pressure_mode: PressureMode,
    pub timing: RewardTiming,
    pub durations: Vec<u32>,
}

impl ControlSettings {
    pub fn new(phase_policy: PhasePolicy, reward: RewardKind) -> Self {
        ControlSettings {
            phase_policy,
            reward,
            pressure_mode: PressureMode::default(),
            timing: RewardTiming::default(),
            durations: Hyperparams::default().durations,
        }
    }

    /// Default pairing: max-queue phases with the queue reward.
    pub fn max_queue() -> Self {
        Self::new(PhasePolicy::Rule(PhaseRule::MaxQueue), RewardKind::Queue)
    }

    /// Checks the reward pairing and that the network can score every phase
    /// when the agent itself picks the phase.
    pub fn validate(&self, model: &ModelConfig) -> Result<(), AgentError> {
        match (self.phase_policy, self.reward) {
            (PhasePolicy::Rule(PhaseRule::MaxQueue), RewardKind::Pressure) => {
                return Err(AgentError::Config("max_queue pairs with the queue reward".into()))
            }
            (PhasePolicy::Rule(PhaseRule::EfficientPressure), RewardKind::Queue) => {
                return Err(AgentError::Config("efficient_mp pairs with the pressure reward".into()))
            }
            _ => {}
        }
        if self.phase_policy == PhasePolicy::MaxStateValue
            && (model.kind != AgentKind::Full || model.network != NetworkVariant::Three)
        {
            return Err(AgentError::Config("max_state_value requires the full agent with network 3".into()));
        }
        if self.durations.len() != ACTIONS {
            return Err(AgentError::Config("exactly 7 durations are required".into()));
        }
        Ok(())
    }
}
