use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::rollout::{run_episode, Controller, EpisodeEnd, PolicyController};
use super::HarnessError;
use crate::observation::DepthFrame;
use crate::sac::{Checkpoint, SacAgent, SacError};
use crate::simworld::{EnvId, EnvSpec, Simulator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub success_rate: f64,
    pub mean_reward: f64,
    pub episodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub env_id: EnvId,
    pub seed: u64,
    pub sessions: Vec<SessionReport>,
    pub mean_success_rate: f64,
    pub mean_reward: f64,
}

impl EvalReport {
    fn from_sessions(env_id: EnvId, seed: u64, sessions: Vec<SessionReport>) -> Self {
        let n = sessions.len().max(1) as f64;
        Self {
            env_id,
            seed,
            mean_success_rate: sessions.iter().map(|s| s.success_rate).sum::<f64>() / n,
            mean_reward: sessions.iter().map(|s| s.mean_reward).sum::<f64>() / n,
            sessions,
        }
    }
}

/// Reset seed for episode `episode` of session `session`.
pub fn eval_episode_seed(session: usize, episode: usize) -> u64 {
    ((session as u64) << 32) | episode as u64
}

/// Training config stored in the checkpoint, checked against the restored agent.
pub(crate) fn restore(ck: &Checkpoint) -> Result<(TrainConfig, SacAgent), HarnessError> {
    if ck.run.is_null() {
        return Err(HarnessError::MissingRunConfig);
    }
    let cfg: TrainConfig = serde_json::from_value(ck.run.clone())?;
    let agent = ck.to_agent()?;
    if cfg.obs_variant.state_dim() != agent.state_dim() {
        return Err(SacError::StateDim {
            expected: agent.state_dim(),
            got: cfg.obs_variant.state_dim(),
        }
        .into());
    }
    Ok((cfg, agent))
}

/// Deterministic-policy evaluation of a checkpoint. The checkpoint is only read.
pub fn evaluate(
    ck: &Checkpoint,
    env: EnvId,
    sessions: usize,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, HarnessError> {
    let (cfg, agent) = restore(ck)?;
    let mut ctl = PolicyController {
        policy: agent.snapshot(),
    };
    evaluate_controller(
        &cfg,
        env,
        sessions,
        episodes,
        seed,
        &mut ctl,
        &mut |_, first| first,
    )
}

/// Evaluation protocol for any controller. `arrange` runs after each reset and
/// may reposition the robot or target; it returns the first depth frame.
pub fn evaluate_controller(
    cfg: &TrainConfig,
    env: EnvId,
    sessions: usize,
    episodes: usize,
    seed: u64,
    ctl: &mut dyn Controller,
    arrange: &mut dyn FnMut(&mut Simulator, DepthFrame) -> DepthFrame,
) -> Result<EvalReport, HarnessError> {
    let spec = EnvSpec::standard(env, &cfg.sim, seed);
    let mut sim = Simulator::new(cfg.sim.clone(), spec, cfg.max_steps)?;
    let mut reports = Vec::with_capacity(sessions);
    for session in 0..sessions {
        let (mut hits, mut total) = (0usize, 0.0);
        for episode in 0..episodes {
            let (_, _, first) = sim.reset(eval_episode_seed(session, episode))?;
            let first = arrange(&mut sim, first);
            let trace = run_episode(&mut sim, first, cfg.obs_variant, &cfg.reward, ctl)?;
            hits += usize::from(trace.end == EpisodeEnd::Reached);
            total += trace.episode_return;
        }
        reports.push(SessionReport {
            success_rate: hits as f64 / episodes.max(1) as f64,
            mean_reward: total / episodes.max(1) as f64,
            episodes,
        });
    }
    Ok(EvalReport::from_sessions(env, seed, reports))
}
