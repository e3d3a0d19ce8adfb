use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::agent::{AgentParts, SacAgent, SacConfig};
use crate::nn::{ActionBounds, AdamState, Mlp, NetworkDoc, NnError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint format_version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("checkpoint network `{name}` is malformed: {source}")]
    Network {
        name: &'static str,
        #[source]
        source: NnError,
    },
    #[error("checkpoint optimizer `{name}` has {got} moments for {expected} parameters")]
    Optimizer {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("checkpoint networks disagree on the state width")]
    Shape,
    #[error("checkpoint I/O on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Networks {
    pub policy: NetworkDoc,
    pub q: NetworkDoc,
    pub value: NetworkDoc,
    pub value_target: NetworkDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Optimizers {
    pub policy: AdamState,
    pub q: AdamState,
    pub value: AdamState,
}

/// JSON checkpoint: all four networks, optimizer moments and counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Environment the curriculum was on when this was written.
    pub env_id: u8,
    /// Episodes completed when this was written.
    pub episode: u64,
    pub train_steps: u64,
    pub sac: SacConfig,
    pub bounds: ActionBounds,
    pub networks: Networks,
    pub optimizers: Optimizers,
    /// Opaque run description owned by the caller (e.g. the training config).
    #[serde(default)]
    pub run: serde_json::Value,
}

impl Checkpoint {
    pub fn from_agent(agent: &SacAgent, env_id: u8, episode: u64, run: serde_json::Value) -> Self {
        let cfg = agent.config();
        Self {
            format_version: FORMAT_VERSION,
            alpha: cfg.alpha,
            gamma: cfg.gamma,
            tau: cfg.tau,
            env_id,
            episode,
            train_steps: agent.train_steps,
            sac: cfg.clone(),
            bounds: agent.bounds(),
            networks: Networks {
                policy: agent.policy.to_doc(),
                q: agent.q.to_doc(),
                value: agent.value.to_doc(),
                value_target: agent.value_target.to_doc(),
            },
            optimizers: Optimizers {
                policy: agent.policy_opt.clone(),
                q: agent.q_opt.clone(),
                value: agent.value_opt.clone(),
            },
            run,
        }
    }

    pub fn to_agent(&self) -> Result<SacAgent, CheckpointError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: self.format_version,
            });
        }
        let net = |name: &'static str, doc: &NetworkDoc| {
            Mlp::from_doc(doc).map_err(|source| CheckpointError::Network { name, source })
        };
        let policy = net("policy", &self.networks.policy)?;
        let q = net("q", &self.networks.q)?;
        let value = net("value", &self.networks.value)?;
        let value_target = net("value_target", &self.networks.value_target)?;
        let s = policy.input_dim();
        if q.input_dim() != s + crate::nn::ACTION_DIM
            || value.input_dim() != s
            || value_target.input_dim() != s
            || value.param_count() != value_target.param_count()
        {
            return Err(CheckpointError::Shape);
        }
        for (name, state, n) in [
            ("policy", &self.optimizers.policy, policy.param_count()),
            ("q", &self.optimizers.q, q.param_count()),
            ("value", &self.optimizers.value, value.param_count()),
        ] {
            if state.m.len() != n || state.v.len() != n {
                return Err(CheckpointError::Optimizer {
                    name,
                    expected: n,
                    got: state.m.len(),
                });
            }
        }
        let mut cfg = self.sac.clone();
        cfg.alpha = self.alpha;
        cfg.gamma = self.gamma;
        cfg.tau = self.tau;
        Ok(SacAgent::from_parts(AgentParts {
            cfg,
            bounds: self.bounds,
            policy,
            q,
            value,
            value_target,
            policy_opt: self.optimizers.policy.clone(),
            q_opt: self.optimizers.q.clone(),
            value_opt: self.optimizers.value.clone(),
            train_steps: self.train_steps,
        }))
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let json = serde_json::to_string(self)?;
        let tmp = path.with_extension("json.tmp");
        let io = |source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        };
        fs::write(&tmp, json).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: ck.format_version,
            });
        }
        Ok(ck)
    }
}
