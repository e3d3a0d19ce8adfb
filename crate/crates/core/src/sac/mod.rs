//! Soft Actor-Critic with a single soft Q-function, a soft state-value
//! function and its slowly tracking target copy.

mod agent;
mod checkpoint;
mod replay;

pub use agent::{
    ActionChoice, ActionMode, LossGrad, LossReport, PolicySnapshot, SacAgent, SacConfig,
};
pub use checkpoint::{Checkpoint, CheckpointError, FORMAT_VERSION};
pub use replay::{Batch, ReplayBuffer, Transition};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SacError {
    #[error("replay buffer holds {have} transitions, a batch needs {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("state has {got} entries, agent expects {expected}")]
    StateDim { expected: usize, got: usize },
    #[error("invalid SAC hyper-parameter `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Network(#[from] crate::nn::NnError),
}
