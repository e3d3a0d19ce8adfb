//! Depth-based mapless navigation for a differential-drive robot.
//!
//! The crate bundles everything needed to train and evaluate a navigation
//! policy end to end:
//!
//! - [`simworld`]: a deterministic 2D kinematic world with box obstacles and a
//!   ray-cast depth scanner.
//! - [`observation`]: depth-frame history and the network state vector.
//! - [`reward`]: the shaped distance-rate reward with its velocity factor.
//! - [`nn`]: dense networks with hand-written backpropagation, Adam and a
//!   tanh-squashed Gaussian policy head.
//! - [`sac`]: the Soft Actor-Critic agent (policy, soft Q, soft V, target V).
//! - [`curriculum`]: success-rate gated promotion/demotion across the three
//!   training environments.
//! - [`harness`]: configuration, training loop, evaluation, trajectory export
//!   and the comparison grid.

pub mod curriculum;
pub mod harness;
pub mod nn;
pub mod observation;
pub mod reward;
pub mod sac;
pub mod simworld;

pub use curriculum::{
    CurriculumMode, CurriculumState, EpisodeOutcome, Transition as EnvTransition,
};
pub use observation::{DepthFrame, FrameHistory, ObsVariant, StateVector, TargetPolar};
pub use reward::{RewardConfig, RewardOutcome};
pub use sac::{SacAgent, SacConfig};
pub use simworld::{Action, EnvId, EnvSpec, Pose, RobotState, SimParams, Simulator, StepOutcome};
