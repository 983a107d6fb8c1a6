use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::flow::FlowSet;
use crate::metrics;
use crate::nn::{load_weights, Adam, ParamStore};
use crate::roadnet::Network;
use crate::sim::{run_episode, EpisodeLog, EpisodeOptions, SimConfig, SimError};

use super::controller::AgentController;
use super::learn::{epsilon_for_episode, train_round};
use super::model::{ModelConfig, QModel};
use super::replay::ReplayBuffer;
use super::{AgentError, ControlSettings, Hyperparams};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub model: ModelConfig,
    pub control: ControlSettings,
    pub hp: Hyperparams,
    pub sim: SimConfig,
    pub seed: u64,
    /// Warm start; a fresh seeded initialization otherwise.
    pub initial: Option<ParamStore>,
}

impl TrainingConfig {
    pub fn new(model: ModelConfig, control: ControlSettings, seed: u64) -> Self {
        TrainingConfig { model, control, hp: Hyperparams::default(), sim: SimConfig::default(), seed, initial: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    /// Mean squared TD error of the round after the episode.
    pub loss: f64,
    /// Greedy evaluation travel time; empty when the evaluation had no
    /// vehicles or could not drain.
    pub aatt: Option<f64>,
    /// Vehicles that finished during the training episode.
    pub throughput: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    /// Weights with the best evaluation travel time (the final weights if no
    /// evaluation produced one).
    pub params: ParamStore,
    pub final_params: ParamStore,
    pub history: Vec<EpisodeMetrics>,
    pub best_episode: Option<usize>,
    pub best_aatt: Option<f64>,
}

/// Greedy episode that runs until every vehicle has left.
pub fn evaluate(
    net: &Network,
    flow: &FlowSet,
    model: &QModel,
    params: &ParamStore,
    control: &ControlSettings,
    sim: SimConfig,
    horizon: u32,
) -> Result<EpisodeLog, AgentError> {
    let mut ctl = AgentController::new(net, model, params, control, 0.0, 0, false);
    let opts = EpisodeOptions { sim, ..EpisodeOptions::new(horizon, true) };
    Ok(run_episode(net, flow, &mut ctl, &opts)?)
}

/// Alternates exploring episodes, learning rounds and greedy evaluations;
/// stops after `patience` evaluations without improvement.
pub fn run_training(net: &Network, flow: &FlowSet, cfg: &TrainingConfig) -> Result<TrainingOutcome, AgentError> {
    let hp = &cfg.hp;
    hp.validate()?;
    cfg.control.validate(&cfg.model)?;
    cfg.sim.validate()?;
    let model = QModel::new(cfg.model);
    model.check_network(net)?;
    let mut params = match &cfg.initial {
        Some(p) => {
            model.check_params(p)?;
            p.clone()
        }
        None => model.init(cfg.seed),
    };
    let mut opt = Adam::new(&params, hp.lr);
    let mut buffer = ReplayBuffer::new(hp.replay_capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1));
    let train_opts = EpisodeOptions { sim: cfg.sim, ..EpisodeOptions::new(hp.episode_seconds, false) };

    let mut history = Vec::with_capacity(hp.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut stale = 0;
    for episode in 0..hp.epochs {
        let epsilon = epsilon_for_episode(hp, episode);
        let explore_seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(episode as u64);
        let mut ctl = AgentController::new(net, &model, &params, &cfg.control, epsilon, explore_seed, true);
        let log = run_episode(net, flow, &mut ctl, &train_opts)?;
        buffer.extend(ctl.take_transitions());

        let loss =
            if buffer.is_empty() { 0.0 } else { train_round(&buffer, &model, &mut params, &mut opt, hp, &mut rng)? };

        let aatt = match evaluate(net, flow, &model, &params, &cfg.control, cfg.sim, hp.episode_seconds) {
            Ok(eval) => metrics::aatt(&eval).ok(),
            Err(AgentError::Sim(SimError::DrainTimeout { .. })) => None,
            Err(e) => return Err(e),
        };
        history.push(EpisodeMetrics { episode, loss, aatt, throughput: log.finished(), epsilon });

        match (aatt, &best) {
            (Some(a), Some((b, _, _))) if a >= *b => stale += 1,
            (Some(a), _) => {
                best = Some((a, episode, params.clone()));
                stale = 0;
            }
            (None, _) => stale += 1,
        }
        if stale >= hp.patience {
            break;
        }
    }

    let (best_aatt, best_episode, best_params) = match best {
        Some((a, e, p)) => (Some(a), Some(e), p),
        None => (None, None, params.clone()),
    };
    Ok(TrainingOutcome { params: best_params, final_params: params, history, best_episode, best_aatt })
}

/// Loads weights for `model`, rejecting other architectures.
pub fn load_transfer(path: &Path, model: &QModel) -> Result<ParamStore, AgentError> {
    let params = load_weights(path)?;
    model.check_params(&params)?;
    Ok(params)
}
