use std::collections::VecDeque;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::rollout::{run_episode, Controller, EpisodeEnd, StepRecord};
use super::{io_err, HarnessError};
use crate::curriculum::{
    write_transitions_csv, CurriculumState, EpisodeOutcome, Transition, WINDOW,
};
use crate::nn::ActionBounds;
use crate::sac::{ActionChoice, ActionMode, Checkpoint, ReplayBuffer, SacAgent};
use crate::simworld::{EnvId, EnvSpec, Simulator};

/// Simulator reset seed for a training episode.
pub fn episode_seed(episode: u64) -> u64 {
    episode
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub env_id: EnvId,
    pub steps: usize,
    pub outcome: EpisodeEnd,
    pub episode_return: f64,
    /// Success fraction over the last (up to) 100 episodes of the run.
    pub success_rate_100: f64,
    pub transition: Option<Transition>,
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub episodes: u64,
    pub final_env: EnvId,
    pub transitions: Vec<Transition>,
    pub metrics_csv: PathBuf,
    pub transitions_csv: PathBuf,
    pub checkpoint: PathBuf,
}

struct Learner<'a> {
    agent: &'a mut SacAgent,
    buffer: &'a mut ReplayBuffer,
    rng: &'a mut ChaCha8Rng,
    warmup: usize,
}

impl Controller for Learner<'_> {
    fn act(&mut self, state: &[f64]) -> Result<ActionChoice, HarnessError> {
        Ok(self
            .agent
            .select_action(state, ActionMode::Stochastic, self.rng)?)
    }

    fn observe(&mut self, step: &StepRecord) -> Result<(), HarnessError> {
        self.buffer.push(
            &step.state,
            step.normalized,
            step.reward,
            &step.next_state,
            step.done,
        );
        if self.buffer.len() >= self.warmup.max(self.agent.config().batch_size) {
            self.agent.train_step(self.buffer, self.rng)?;
        }
        Ok(())
    }
}

/// The episode loop, one call per episode.
pub struct Trainer {
    cfg: TrainConfig,
    agent: SacAgent,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    curriculum: CurriculumState,
    sims: [Option<Simulator>; 3],
    episode: u64,
    recent: VecDeque<bool>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        let bounds = ActionBounds {
            v_max: cfg.sim.v_max,
            w_max: cfg.sim.w_max,
        };
        let state_dim = cfg.obs_variant.state_dim();
        let agent = SacAgent::new(state_dim, cfg.sac.clone(), bounds, &mut rng)?;
        let buffer = ReplayBuffer::new(cfg.sac.replay_capacity, state_dim);
        let curriculum = CurriculumState::with_thresholds(cfg.curriculum_mode, cfg.curriculum)
            .map_err(|e| HarnessError::Config {
                field: "curriculum".into(),
                reason: e.to_string(),
            })?;
        Ok(Self {
            cfg,
            agent,
            buffer,
            rng,
            curriculum,
            sims: [None, None, None],
            episode: 0,
            recent: VecDeque::with_capacity(WINDOW),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn agent(&self) -> &SacAgent {
        &self.agent
    }

    pub fn curriculum(&self) -> &CurriculumState {
        &self.curriculum
    }

    pub fn episodes_done(&self) -> u64 {
        self.episode
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let run = serde_json::to_value(&self.cfg).expect("config serializes");
        Checkpoint::from_agent(
            &self.agent,
            self.curriculum.current_env().number(),
            self.episode,
            run,
        )
    }

    fn take_simulator(&mut self, env: EnvId) -> Result<Simulator, HarnessError> {
        match self.sims[env.number() as usize - 1].take() {
            Some(sim) => Ok(sim),
            None => {
                let spec = EnvSpec::standard(env, &self.cfg.sim, self.cfg.seed);
                Ok(Simulator::new(
                    self.cfg.sim.clone(),
                    spec,
                    self.cfg.max_steps,
                )?)
            }
        }
    }

    pub fn run_episode(&mut self) -> Result<EpisodeMetrics, HarnessError> {
        let env = self.curriculum.current_env();
        let index = self.episode;
        let variant = self.cfg.obs_variant;
        let reward = self.cfg.reward.clone();
        let warmup = self.cfg.sac.warmup;
        let mut sim = self.take_simulator(env)?;
        let (_, _, first) = sim.reset(episode_seed(index))?;
        let mut learner = Learner {
            agent: &mut self.agent,
            buffer: &mut self.buffer,
            rng: &mut self.rng,
            warmup,
        };
        let trace = run_episode(&mut sim, first, variant, &reward, &mut learner)?;
        self.sims[env.number() as usize - 1] = Some(sim);

        let success = trace.end == EpisodeEnd::Reached;
        if self.recent.len() == WINDOW {
            self.recent.pop_front();
        }
        self.recent.push_back(success);
        let transition = self.curriculum.record_episode(&EpisodeOutcome {
            success,
            episode_index: index,
            episode_return: trace.episode_return,
            steps: trace.steps.len(),
        });
        self.episode += 1;
        Ok(EpisodeMetrics {
            episode: index,
            env_id: env,
            steps: trace.steps.len(),
            outcome: trace.end,
            episode_return: trace.episode_return,
            success_rate_100: self.recent.iter().filter(|&&s| s).count() as f64
                / self.recent.len() as f64,
            transition,
        })
    }
}

/// Full run with output files under `cfg.out_dir`.
pub fn train(cfg: &TrainConfig) -> Result<TrainSummary, HarnessError> {
    train_with(cfg, |_| {})
}

/// As [`train`], calling `on_episode` after every episode.
pub fn train_with(
    cfg: &TrainConfig,
    mut on_episode: impl FnMut(&EpisodeMetrics),
) -> Result<TrainSummary, HarnessError> {
    let out = cfg.out_dir.clone();
    let ck_dir = out.join("checkpoints");
    fs::create_dir_all(&ck_dir).map_err(io_err(&ck_dir))?;
    let cfg_path = out.join("config.json");
    fs::write(&cfg_path, cfg.to_json()).map_err(io_err(&cfg_path))?;

    let mut trainer = Trainer::new(cfg.clone())?;
    let metrics_csv = out.join("metrics.csv");
    let file = File::create(&metrics_csv).map_err(io_err(&metrics_csv))?;
    let mut metrics = csv::Writer::from_writer(BufWriter::new(file));
    metrics.write_record([
        "episode",
        "env_id",
        "steps",
        "outcome",
        "return",
        "success_rate_100",
    ])?;
    for _ in 0..cfg.total_episodes {
        let m = trainer.run_episode()?;
        metrics.write_record([
            m.episode.to_string(),
            m.env_id.number().to_string(),
            m.steps.to_string(),
            m.outcome.as_str().to_string(),
            m.episode_return.to_string(),
            m.success_rate_100.to_string(),
        ])?;
        on_episode(&m);
        let done = trainer.episodes_done();
        if done % cfg.checkpoint_every == 0 && done != cfg.total_episodes {
            let path = ck_dir.join(format!("episode_{done:06}.json"));
            trainer.checkpoint().save(&path)?;
        }
    }
    metrics.flush().map_err(io_err(&metrics_csv))?;

    let transitions_csv = out.join("transitions.csv");
    let file = File::create(&transitions_csv).map_err(io_err(&transitions_csv))?;
    write_transitions_csv(trainer.curriculum().transitions(), file)?;

    let checkpoint = out.join("checkpoint.json");
    trainer.checkpoint().save(&checkpoint)?;
    Ok(TrainSummary {
        episodes: trainer.episodes_done(),
        final_env: trainer.curriculum().current_env(),
        transitions: trainer.curriculum().transitions().to_vec(),
        metrics_csv,
        transitions_csv,
        checkpoint,
    })
}
