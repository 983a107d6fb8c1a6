//! Declarative experiment description and the runners built on it.
//!
//! A config is one TOML file:
//!
//! ```toml
//! seeds = [1, 2, 3]
//! eval_episodes = 10
//! output_dir = "runs/grid"
//!
//! [network]            # either `file` or a generated grid
//! rows = 3
//! cols = 4
//! preset = "A"
//! ew = 400.0
//! ns = 800.0
//!
//! [flow]               # either `file` or generator settings
//! rate = 0.1           # vehicles per second per entry road
//! ratios = { left = 0.1, straight = 0.6, right = 0.3 }
//! horizon = 3600
//!
//! [controller]
//! policy = "max_queue" # fixed_time | cyclic | max_queue | efficient_mp | max_state_value
//! agent = "full"       # none | full | lite
//! network = 1
//! fusion = 1
//! reward = "queue"     # queue | pressure
//!
//! [hyper]              # learning settings, see `Hyperparams`
//! [sim]                # engine settings, see `SimConfig`
//! ```
//!
//! Relative file paths are resolved against the config file's directory.
//! [`ExperimentConfig::to_toml`] writes every setting explicitly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    evaluate, run_training, AgentError, AgentKind, ControlSettings, Fusion, Hyperparams, ModelConfig, NetworkVariant,
    PhasePolicy, QModel, RewardKind, RewardTiming, TrainingConfig, TrainingOutcome,
};
use crate::flow::{generate_flow, parse_flow, FlowError, FlowSet, TurnRatios};
use crate::metrics::{EvalReport, MetricsError};
use crate::nn::ParamStore;
use crate::policy::{FixedTimeController, PhaseRule, PolicyName, PressureMode, RuleController};
use crate::roadnet::{build_grid_with, parse_roadnet, Network, RoadnetError, Topology};
use crate::sim::{run_episode, Controller, EpisodeLog, EpisodeOptions, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Roadnet(#[from] RoadnetError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ExperimentError {
    /// Whether the error is a problem with the inputs rather than a failure
    /// while running.
    pub fn is_validation(&self) -> bool {
        match self {
            ExperimentError::Parse(_)
            | ExperimentError::Invalid(_)
            | ExperimentError::Roadnet(_)
            | ExperimentError::Flow(_) => true,
            ExperimentError::Agent(e) => {
                matches!(e, AgentError::Config(_) | AgentError::TooManyLanes { .. } | AgentError::Nn(_))
            }
            ExperimentError::Sim(e) => matches!(e, SimError::Config(_) | SimError::Flow(_)),
            ExperimentError::Io { .. } | ExperimentError::Metrics(_) => false,
        }
    }
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Invalid(msg.into())
}

pub fn read_file(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    pub rows: usize,
    pub cols: usize,
    pub preset: Topology,
    /// Meters, east-west roads.
    pub ew: f64,
    /// Meters, north-south roads.
    pub ns: f64,
    pub right_turns_signalized: bool,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec { file: None, rows: 3, cols: 4, preset: Topology::A, ew: 400.0, ns: 800.0, right_turns_signalized: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Vehicles per second per entry road.
    pub rate: f64,
    pub ratios: TurnRatios,
    /// Seconds of demand.
    pub horizon: u32,
    /// Generator seed; the run seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec { file: None, rate: 0.1, ratios: TurnRatios::default(), horizon: 3600, seed: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentChoice {
    /// Rule-based control only.
    None,
    #[default]
    Full,
    Lite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSpec {
    pub policy: PolicyName,
    pub agent: AgentChoice,
    pub network: NetworkVariant,
    pub fusion: Fusion,
    pub per_feature_embedding: bool,
    pub reward: RewardKind,
    pub pressure_mode: PressureMode,
    pub reward_timing: RewardTiming,
    /// Green seconds per decision of the rule-based baselines.
    pub action_duration: u32,
    /// Fixed-time green seconds per phase; the last entry repeats.
    pub fixed_split: Vec<u32>,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec {
            policy: PolicyName::MaxQueue,
            agent: AgentChoice::Full,
            network: NetworkVariant::One,
            fusion: Fusion::AttentionMean,
            per_feature_embedding: false,
            reward: RewardKind::Queue,
            pressure_mode: PressureMode::Intersection,
            reward_timing: RewardTiming::NextDecision,
            action_duration: 15,
            fixed_split: vec![30],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
    pub output_dir: PathBuf,
    pub network: NetworkSpec,
    pub flow: FlowSpec,
    pub controller: ControllerSpec,
    pub hyper: Hyperparams,
    pub sim: SimConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![1],
            eval_episodes: 10,
            output_dir: PathBuf::from("runs"),
            network: NetworkSpec::default(),
            flow: FlowSpec::default(),
            controller: ControllerSpec::default(),
            hyper: Hyperparams::default(),
            sim: SimConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config; missing settings take their defaults, and an absent
    /// `hyper.episode_seconds` follows `flow.horizon`.
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let mut value: toml::Table = toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
        let horizon = value
            .get("flow")
            .and_then(|f| f.get("horizon"))
            .cloned()
            .unwrap_or(toml::Value::Integer(FlowSpec::default().horizon as i64));
        let hyper = value.entry("hyper").or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if let Some(h) = hyper.as_table_mut() {
            h.entry("episode_seconds").or_insert(horizon);
        }
        let defaults = toml::Table::try_from(ExperimentConfig::default()).expect("defaults serialize");
        let merged = merge(defaults, value);
        merged.try_into().map_err(|e: toml::de::Error| ExperimentError::Parse(e.to_string()))
    }

    /// Loads `path`, resolving relative file references against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let mut cfg = Self::from_toml_str(&read_file(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for f in [&mut cfg.network.file, &mut cfg.flow.file].into_iter().flatten() {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Full check of every setting, including referenced files, without
    /// running the simulator.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(invalid("seeds must not be empty"));
        }
        if self.eval_episodes == 0 {
            return Err(invalid("eval_episodes must be positive"));
        }
        let n = &self.network;
        match &n.file {
            Some(f) if !f.is_file() => return Err(invalid(format!("network file {} not found", f.display()))),
            Some(_) => {}
            None => {
                if n.rows == 0 || n.cols == 0 {
                    return Err(invalid("network rows and cols must be positive"));
                }
                if !(n.ew > 0.0 && n.ns > 0.0 && n.ew.is_finite() && n.ns.is_finite()) {
                    return Err(invalid("road lengths must be positive"));
                }
            }
        }
        let f = &self.flow;
        match &f.file {
            Some(p) if !p.is_file() => return Err(invalid(format!("flow file {} not found", p.display()))),
            Some(_) => {}
            None => {
                if !(f.rate >= 0.0 && f.rate.is_finite()) {
                    return Err(invalid("flow rate must be non-negative"));
                }
                f.ratios.validate()?;
            }
        }
        if f.horizon == 0 {
            return Err(invalid("flow horizon must be positive"));
        }
        self.hyper.validate()?;
        if self.hyper.episode_seconds != f.horizon {
            return Err(invalid(format!(
                "hyper.episode_seconds ({}) must equal flow.horizon ({})",
                self.hyper.episode_seconds, f.horizon
            )));
        }
        self.sim.validate()?;
        let c = &self.controller;
        if c.action_duration == 0 {
            return Err(invalid("action_duration must be positive"));
        }
        if c.fixed_split.is_empty() || c.fixed_split.contains(&0) {
            return Err(invalid("fixed_split entries must be positive"));
        }
        match self.model_config() {
            None => {
                if c.policy == PolicyName::MaxStateValue {
                    return Err(invalid("max_state_value needs an agent"));
                }
            }
            Some(model) => {
                if c.policy == PolicyName::FixedTime {
                    return Err(invalid("fixed_time cannot be combined with an agent; set agent = \"none\""));
                }
                self.control_settings()?.validate(&model)?;
            }
        }
        Ok(())
    }

    pub fn model_config(&self) -> Option<ModelConfig> {
        let c = &self.controller;
        let kind = match c.agent {
            AgentChoice::None => return None,
            AgentChoice::Full => AgentKind::Full,
            AgentChoice::Lite => AgentKind::Lite,
        };
        Some(ModelConfig { kind, network: c.network, fusion: c.fusion, per_feature_embedding: c.per_feature_embedding })
    }

    pub fn control_settings(&self) -> Result<ControlSettings, ExperimentError> {
        let c = &self.controller;
        Ok(ControlSettings {
            phase_policy: PhasePolicy::from_name(c.policy)?,
            reward: c.reward,
            pressure_mode: c.pressure_mode,
            timing: c.reward_timing,
            durations: self.hyper.durations.clone(),
        })
    }

    /// Label used in reports.
    pub fn method_name(&self) -> String {
        let c = &self.controller;
        match self.model_config() {
            None => match c.policy {
                PolicyName::FixedTime => "fixed_time".into(),
                p => format!("{p}-{}s", c.action_duration),
            },
            Some(m) => format!("{m}/{}", c.policy),
        }
    }

    pub fn load_network(&self) -> Result<Network, ExperimentError> {
        let n = &self.network;
        match &n.file {
            Some(f) => Ok(parse_roadnet(&read_file(f)?)?),
            None => Ok(build_grid_with(n.rows, n.cols, n.preset, n.ew, n.ns, n.right_turns_signalized)?),
        }
    }

    /// Demand of evaluation episode `episode` for run `seed`; episode 0 is
    /// also the training demand. Generated flows use a fresh seed per
    /// episode, file flows repeat.
    pub fn flow_for(&self, net: &Network, seed: u64, episode: usize) -> Result<FlowSet, ExperimentError> {
        let f = &self.flow;
        match &f.file {
            Some(p) => Ok(parse_flow(&read_file(p)?, net)?),
            None => {
                let base = f.seed.unwrap_or(seed);
                Ok(generate_flow(net, f.rate, &f.ratios, f.horizon, base.wrapping_add(episode as u64)))
            }
        }
    }

    /// Demand horizon of `flow`: the configured one, stretched to cover
    /// every start time of a file flow.
    pub fn horizon_for(&self, flow: &FlowSet) -> u32 {
        let last = flow.vehicles().last().map_or(0, |v| v.start_time + 1);
        self.flow.horizon.max(last)
    }

    /// Rule-based controller for `agent = "none"`.
    pub fn baseline_controller(&self) -> Box<dyn Controller> {
        let c = &self.controller;
        let rule = |r| Box::new(RuleController::new(r, c.action_duration)) as Box<dyn Controller>;
        match c.policy {
            PolicyName::FixedTime => Box::new(FixedTimeController::new(c.fixed_split.clone())),
            PolicyName::Cyclic => rule(PhaseRule::Cyclic),
            PolicyName::MaxQueue => rule(PhaseRule::MaxQueue),
            PolicyName::EfficientMp => rule(PhaseRule::EfficientPressure),
            PolicyName::MaxStateValue => unreachable!("rejected by validation"),
        }
    }

    pub fn training_config(&self, seed: u64, initial: Option<ParamStore>) -> Result<TrainingConfig, ExperimentError> {
        let model = self.model_config().ok_or_else(|| invalid("training needs agent = \"full\" or \"lite\""))?;
        Ok(TrainingConfig {
            model,
            control: self.control_settings()?,
            hp: self.hyper.clone(),
            sim: self.sim,
            seed,
            initial,
        })
    }

    pub fn train(
        &self,
        net: &Network,
        seed: u64,
        initial: Option<ParamStore>,
    ) -> Result<TrainingOutcome, ExperimentError> {
        let flow = self.flow_for(net, seed, 0)?;
        Ok(run_training(net, &flow, &self.training_config(seed, initial)?)?)
    }

    /// One drained episode of the configured controller; `params` drives the
    /// agent and is required when one is configured.
    pub fn run_eval_episode(
        &self,
        net: &Network,
        flow: &FlowSet,
        params: Option<&ParamStore>,
    ) -> Result<EpisodeLog, ExperimentError> {
        let horizon = self.horizon_for(flow);
        match self.model_config() {
            None => {
                let opts = EpisodeOptions { sim: self.sim, ..EpisodeOptions::new(horizon, true) };
                Ok(run_episode(net, flow, self.baseline_controller().as_mut(), &opts)?)
            }
            Some(m) => {
                let params = params.ok_or_else(|| invalid("weights are required to evaluate an agent"))?;
                let model = QModel::new(m);
                model.check_params(params)?;
                model.check_network(net)?;
                Ok(evaluate(net, flow, &model, params, &self.control_settings()?, self.sim, horizon)?)
            }
        }
    }

    /// `eval_episodes` drained episodes for `seed`, one report each.
    pub fn evaluate_seed(
        &self,
        net: &Network,
        seed: u64,
        params: Option<&ParamStore>,
    ) -> Result<Vec<EvalReport>, ExperimentError> {
        (0..self.eval_episodes)
            .map(|k| {
                let flow = self.flow_for(net, seed, k)?;
                let log = self.run_eval_episode(net, &flow, params)?;
                Ok(EvalReport::from_log(self.method_name(), &log)?)
            })
            .collect()
    }
}

/// Overlays `over` onto `base`, recursing into tables.
fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (k, v) in over {
        let merged = match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => toml::Value::Table(merge(b, o)),
            (_, v) => v,
        };
        base.insert(k, merged);
    }
    base
}
