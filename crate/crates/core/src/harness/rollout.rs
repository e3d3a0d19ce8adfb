use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::nn::ActionBounds;
use crate::observation::{
    assemble_state, build_obs, target_polar, DepthFrame, FrameHistory, ObsVariant, DEPTH_SIZE,
};
use crate::reward::{compute_reward, RewardConfig};
use crate::sac::{ActionChoice, PolicySnapshot};
use crate::simworld::{Action, Pose, Simulator};

/// How an episode finished.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeEnd {
    Reached,
    Collision,
    Timeout,
}

impl EpisodeEnd {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Reached => "reached",
            Self::Collision => "collision",
            Self::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based step index.
    pub t: usize,
    pub state: Vec<f64>,
    /// Squashed action in (-1, 1) per channel.
    pub normalized: [f64; 2],
    /// Command actually applied after clamping.
    pub command: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Physical terminal (collision or reached). Timeouts stay `false`.
    pub done: bool,
    pub pose: Pose,
    pub distance: f64,
    pub depth: [f64; DEPTH_SIZE],
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub start: Pose,
    pub target: [f64; 2],
    pub steps: Vec<StepRecord>,
    pub end: EpisodeEnd,
    pub episode_return: f64,
}

/// Chooses actions and optionally learns from each step.
pub trait Controller {
    fn act(&mut self, state: &[f64]) -> Result<ActionChoice, HarnessError>;

    fn observe(&mut self, _step: &StepRecord) -> Result<(), HarnessError> {
        Ok(())
    }
}

/// Deterministic (mean) action of a frozen policy.
pub struct PolicyController {
    pub policy: PolicySnapshot,
}

impl Controller for PolicyController {
    fn act(&mut self, state: &[f64]) -> Result<ActionChoice, HarnessError> {
        let normalized = self.policy.head(state)?.mode();
        Ok(ActionChoice {
            normalized,
            command: self.policy.bounds.to_command(normalized),
        })
    }
}

/// Replays a fixed command every step.
pub struct ScriptedController {
    pub command: Action,
    pub bounds: ActionBounds,
}

impl Controller for ScriptedController {
    fn act(&mut self, _state: &[f64]) -> Result<ActionChoice, HarnessError> {
        Ok(ActionChoice {
            normalized: self.bounds.to_normalized(self.command),
            command: self.command,
        })
    }
}

/// Network input for the current history, robot pose and previous command.
pub fn observe(
    history: &FrameHistory,
    variant: ObsVariant,
    pose: &Pose,
    target: [f64; 2],
    last: Action,
) -> Result<Vec<f64>, HarnessError> {
    let obs = build_obs(history, variant);
    Ok(assemble_state(obs, variant, target_polar(pose, target), last)?.to_vec())
}

/// Run one episode from the simulator's current (already reset) state.
pub fn run_episode(
    sim: &mut Simulator,
    first: DepthFrame,
    variant: ObsVariant,
    reward_cfg: &RewardConfig,
    ctl: &mut dyn Controller,
) -> Result<EpisodeTrace, HarnessError> {
    let start = sim.robot().pose;
    let target = sim.target();
    let mut history = FrameHistory::new(first);
    let mut state = observe(&history, variant, &start, target, Action::ZERO)?;
    let mut d_prev = sim.distance_to_target();
    let mut steps = Vec::new();
    let mut total = 0.0;
    loop {
        let choice = ctl.act(&state)?;
        let out = sim.step(choice.command);
        let r = compute_reward(out.distance, d_prev, out.robot.v, out.collision, reward_cfg);
        let command = Action {
            v: out.robot.v,
            w: out.robot.w,
        };
        history.push(out.depth);
        let next_state = observe(&history, variant, &out.robot.pose, target, command)?;
        let rec = StepRecord {
            t: sim.step_index(),
            state,
            normalized: choice.normalized,
            command,
            reward: r.reward,
            next_state: next_state.clone(),
            done: r.terminal,
            pose: out.robot.pose,
            distance: out.distance,
            depth: *out.depth.values(),
        };
        ctl.observe(&rec)?;
        total += r.reward;
        steps.push(rec);
        let end = if out.collision {
            Some(EpisodeEnd::Collision)
        } else if r.terminal {
            Some(EpisodeEnd::Reached)
        } else if out.timeout {
            Some(EpisodeEnd::Timeout)
        } else {
            None
        };
        if let Some(end) = end {
            return Ok(EpisodeTrace {
                start,
                target,
                steps,
                end,
                episode_return: total,
            });
        }
        state = next_state;
        d_prev = out.distance;
    }
}
