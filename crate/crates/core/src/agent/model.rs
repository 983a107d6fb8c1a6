use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{attention, attention_specs, dense_layer, dueling, dueling_specs, Activation, Graph, Matrix, ParamSpec, ParamStore, Var};
use crate::roadnet::Network;
use crate::sim::SEGMENTS;

use super::state::DurationState;
use super::AgentError;

pub const ACTIONS: usize = 7;
/// Width of a lane or phase feature.
pub const HIDDEN: usize = 16;
/// Embedding width of each band count.
pub const EMBED: usize = 4;
pub const HEADS: usize = 4;
/// Lane slots of the concatenation fusion; phases with fewer lanes are
/// zero-padded.
pub const MAX_CONCAT_LANES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Full,
    Lite,
}

/// Output structure of the full network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum NetworkVariant {
    /// Scores only the chosen phase.
    #[default]
    One,
    /// Scores every phase independently.
    Two,
    /// Self-attention across phase features, then scores every phase.
    Three,
}

impl TryFrom<u8> for NetworkVariant {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(NetworkVariant::One),
            2 => Ok(NetworkVariant::Two),
            3 => Ok(NetworkVariant::Three),
            _ => Err(format!("network variant must be 1, 2 or 3, got {v}")),
        }
    }
}

impl From<NetworkVariant> for u8 {
    fn from(v: NetworkVariant) -> u8 {
        match v {
            NetworkVariant::One => 1,
            NetworkVariant::Two => 2,
            NetworkVariant::Three => 3,
        }
    }
}

/// How the lane features of a phase are merged into one phase feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Fusion {
    /// Self-attention over the lanes, then the mean.
    #[default]
    AttentionMean,
    /// The lane mean joins the lanes as an extra token; its attended output
    /// is the phase feature.
    MeanAttention,
    /// Zero-padded concatenation followed by a dense layer.
    Concat,
    /// Plain sum.
    Sum,
}

impl TryFrom<u8> for Fusion {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(Fusion::AttentionMean),
            2 => Ok(Fusion::MeanAttention),
            3 => Ok(Fusion::Concat),
            4 => Ok(Fusion::Sum),
            _ => Err(format!("fusion method must be 1 to 4, got {v}")),
        }
    }
}

impl From<Fusion> for u8 {
    fn from(f: Fusion) -> u8 {
        match f {
            Fusion::AttentionMean => 1,
            Fusion::MeanAttention => 2,
            Fusion::Concat => 3,
            Fusion::Sum => 4,
        }
    }
}

/// Lite ignores `network`, `fusion` and `per_lane_embedding`: it always
/// scores the chosen phase from a summed scalar lane feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: AgentKind,
    pub network: NetworkVariant,
    pub fusion: Fusion,
    /// Separate embedding weights for each of the four band counts instead
    /// of one shared embedding.
    pub per_feature_embedding: bool,
}

impl ModelConfig {
    pub fn full() -> Self {
        ModelConfig::default()
    }

    pub fn lite() -> Self {
        ModelConfig { kind: AgentKind::Lite, ..ModelConfig::default() }
    }

    pub fn full_with(network: NetworkVariant, fusion: Fusion) -> Self {
        ModelConfig { kind: AgentKind::Full, network, fusion, per_feature_embedding: false }
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AgentKind::Lite => write!(f, "lite"),
            AgentKind::Full => {
                write!(f, "full-n{}-f{}", u8::from(self.network), u8::from(self.fusion))?;
                if self.per_feature_embedding {
                    write!(f, "-pf")?;
                }
                Ok(())
            }
        }
    }
}

/// The duration Q-network described by a [`ModelConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QModel {
    pub cfg: ModelConfig,
}

impl QModel {
    pub fn new(cfg: ModelConfig) -> Self {
        QModel { cfg }
    }

    /// Architecture tag stored in weight files.
    pub fn arch(&self) -> String {
        self.cfg.to_string()
    }

    pub fn specs(&self) -> Vec<ParamSpec> {
        if self.cfg.kind == AgentKind::Lite {
            let mut s = ParamSpec::dense("embed", SEGMENTS, 1).to_vec();
            s.extend(ParamSpec::dense("out", 1, ACTIONS));
            return s;
        }
        let mut s = if self.cfg.per_feature_embedding {
            vec![ParamSpec::new("embed.w", SEGMENTS, EMBED, 1), ParamSpec::new("embed.b", SEGMENTS, EMBED, 1)]
        } else {
            ParamSpec::dense("embed", 1, EMBED).to_vec()
        };
        match self.cfg.fusion {
            Fusion::AttentionMean | Fusion::MeanAttention => s.extend(attention_specs("lane_attn", HIDDEN)),
            Fusion::Concat => s.extend(ParamSpec::dense("fuse", MAX_CONCAT_LANES * HIDDEN, HIDDEN)),
            Fusion::Sum => {}
        }
        if self.cfg.network == NetworkVariant::Three {
            s.extend(attention_specs("phase_attn", HIDDEN));
        }
        s.extend(ParamSpec::dense("hidden", HIDDEN, HIDDEN));
        s.extend(dueling_specs(HIDDEN, ACTIONS));
        s
    }

    pub fn init(&self, seed: u64) -> ParamStore {
        ParamStore::init(self.arch(), &self.specs(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn zeros(&self) -> ParamStore {
        ParamStore::zeros(self.arch(), &self.specs())
    }

    /// Rejects weights produced by a different architecture.
    pub fn check_params(&self, params: &ParamStore) -> Result<(), AgentError> {
        self.zeros().check_compatible(params).map_err(AgentError::from)
    }

    /// Rejects networks whose phases this model cannot encode.
    pub fn check_network(&self, net: &Network) -> Result<(), AgentError> {
        for x in &net.intersections {
            for p in &x.phases {
                if p.participating_lanes.is_empty() {
                    return Err(AgentError::EmptyPhase(p.index));
                }
                if self.cfg.kind == AgentKind::Full
                    && self.cfg.fusion == Fusion::Concat
                    && p.participating_lanes.len() > MAX_CONCAT_LANES
                {
                    return Err(AgentError::TooManyLanes {
                        phase: p.index,
                        lanes: p.participating_lanes.len(),
                        max: MAX_CONCAT_LANES,
                    });
                }
            }
        }
        Ok(())
    }

    /// Scores all phases (one row each) for networks 2 and 3, only the
    /// chosen phase (one row) otherwise.
    pub fn forward(&self, g: &mut Graph<'_>, s: &DurationState) -> Var {
        match (self.cfg.kind, self.cfg.network) {
            (AgentKind::Lite, _) => self.lite(g, s, s.phase),
            (AgentKind::Full, NetworkVariant::One) => {
                let f = self.phase_feature(g, s, s.phase);
                self.head(g, f)
            }
            (AgentKind::Full, variant) => {
                let feats: Vec<Var> = (0..s.phase_count()).map(|p| self.phase_feature(g, s, p)).collect();
                let mut f = g.concat_rows(&feats);
                if variant == NetworkVariant::Three {
                    f = attention(g, f, f, "phase_attn", HEADS);
                }
                self.head(g, f)
            }
        }
    }

    pub fn scores_all_phases(&self) -> bool {
        self.cfg.kind == AgentKind::Full && self.cfg.network != NetworkVariant::One
    }

    /// 1×7 scores of the chosen phase.
    pub fn forward_chosen(&self, g: &mut Graph<'_>, s: &DurationState) -> Var {
        let out = self.forward(g, s);
        if self.scores_all_phases() {
            g.slice_rows(out, s.phase, 1)
        } else {
            out
        }
    }

    /// Scores of the seven durations for the chosen phase.
    pub fn q_values(&self, params: &ParamStore, s: &DurationState) -> Vec<f64> {
        let mut g = Graph::new(params);
        let q = self.forward_chosen(&mut g, s);
        g.value(q).data().to_vec()
    }

    /// Duration scores of every phase, one row per phase.
    pub fn q_table(&self, params: &ParamStore, s: &DurationState) -> Vec<Vec<f64>> {
        if self.scores_all_phases() {
            let mut g = Graph::new(params);
            let q = self.forward(&mut g, s);
            let m = g.value(q);
            (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
        } else {
            (0..s.phase_count()).map(|p| self.q_values(params, &s.with_phase(p))).collect()
        }
    }

    fn lane_input(&self, g: &mut Graph<'_>, s: &DurationState, phase: usize) -> Var {
        let rows: Vec<[f64; SEGMENTS]> = s.lanes_of(phase).copied().collect();
        assert!(!rows.is_empty(), "phase {phase} has no lanes");
        g.input(Matrix::from_rows(&rows))
    }

    /// n×16 lane features: each band count embedded into 4 sigmoid units.
    fn embed(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let w = g.param("embed.w");
        let b = g.param("embed.b");
        let mut parts = Vec::with_capacity(SEGMENTS);
        for j in 0..SEGMENTS {
            let col = g.slice_cols(x, j, 1);
            let (wj, bj) =
                if self.cfg.per_feature_embedding { (g.slice_rows(w, j, 1), g.slice_rows(b, j, 1)) } else { (w, b) };
            let z = g.matmul(col, wj);
            let z = g.add_row(z, bj);
            parts.push(g.sigmoid(z));
        }
        g.concat_cols(&parts)
    }

    /// 1×16 feature of `phase`.
    fn phase_feature(&self, g: &mut Graph<'_>, s: &DurationState, phase: usize) -> Var {
        let x = self.lane_input(g, s, phase);
        let h = self.embed(g, x);
        match self.cfg.fusion {
            Fusion::AttentionMean => {
                let a = attention(g, h, h, "lane_attn", HEADS);
                g.mean_rows(a)
            }
            Fusion::MeanAttention => {
                let m = g.mean_rows(h);
                let tokens = g.concat_rows(&[m, h]);
                let a = attention(g, tokens, tokens, "lane_attn", HEADS);
                g.slice_rows(a, 0, 1)
            }
            Fusion::Concat => {
                let n = g.shape(h).0;
                let mut parts: Vec<Var> = (0..n).map(|i| g.slice_rows(h, i, 1)).collect();
                if n < MAX_CONCAT_LANES {
                    parts.push(g.input(Matrix::zeros(1, (MAX_CONCAT_LANES - n) * HIDDEN)));
                }
                let flat = g.concat_cols(&parts);
                dense_layer(g, flat, "fuse", Activation::Relu)
            }
            Fusion::Sum => g.sum_rows(h),
        }
    }

    fn head(&self, g: &mut Graph<'_>, f: Var) -> Var {
        let h = dense_layer(g, f, "hidden", Activation::Relu);
        dueling(g, h)
    }

    fn lite(&self, g: &mut Graph<'_>, s: &DurationState, phase: usize) -> Var {
        let x = self.lane_input(g, s, phase);
        let h = dense_layer(g, x, "embed", Activation::Sigmoid);
        let f = g.sum_rows(h);
        dense_layer(g, f, "out", Activation::Relu)
    }
}
