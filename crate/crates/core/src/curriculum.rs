use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simworld::EnvId;

pub const WINDOW: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum CurriculumError {
    #[error("success window is empty")]
    EmptyWindow,
    #[error("threshold `{name}` = {value} must lie in (0, 1)")]
    ThresholdRange { name: &'static str, value: f64 },
    #[error("promotion threshold `{promote}` must exceed demotion threshold `{demote}`")]
    ThresholdOrder {
        promote: &'static str,
        demote: &'static str,
    },
}

/// How the environment is chosen across a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurriculumMode {
    /// Env1 → Env2 → Env3 with success-rate gates in both directions.
    Incremental,
    NaiveEnv2,
    NaiveEnv3,
}

impl CurriculumMode {
    pub const ALL: [CurriculumMode; 3] = [Self::NaiveEnv2, Self::NaiveEnv3, Self::Incremental];

    pub fn start_env(self) -> EnvId {
        match self {
            Self::Incremental => EnvId::Env1,
            Self::NaiveEnv2 => EnvId::Env2,
            Self::NaiveEnv3 => EnvId::Env3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Incremental => "Env1-2-3",
            Self::NaiveEnv2 => "Env2",
            Self::NaiveEnv3 => "Env3",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub success: bool,
    pub episode_index: u64,
    pub episode_return: f64,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Index of the episode whose outcome triggered the move.
    pub episode_index: u64,
    pub from: EnvId,
    pub to: EnvId,
    pub window_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            alpha1: 0.90,
            alpha2: 0.80,
            beta1: 0.50,
            beta2: 0.50,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), CurriculumError> {
        for (name, value) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(CurriculumError::ThresholdRange { name, value });
            }
        }
        if self.alpha1 <= self.beta1 {
            return Err(CurriculumError::ThresholdOrder {
                promote: "alpha1",
                demote: "beta1",
            });
        }
        if self.alpha2 <= self.beta2 {
            return Err(CurriculumError::ThresholdOrder {
                promote: "alpha2",
                demote: "beta2",
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumState {
    mode: CurriculumMode,
    current: EnvId,
    window: VecDeque<bool>,
    thresholds: Thresholds,
    log: Vec<Transition>,
}

impl CurriculumState {
    pub fn new(mode: CurriculumMode) -> Self {
        Self::with_thresholds(mode, Thresholds::default()).expect("default thresholds are valid")
    }

    pub fn with_thresholds(
        mode: CurriculumMode,
        thresholds: Thresholds,
    ) -> Result<Self, CurriculumError> {
        thresholds.validate()?;
        Ok(Self {
            mode,
            current: mode.start_env(),
            window: VecDeque::with_capacity(WINDOW),
            thresholds,
            log: Vec::new(),
        })
    }

    pub fn mode(&self) -> CurriculumMode {
        self.mode
    }

    pub fn current_env(&self) -> EnvId {
        self.current
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.log
    }

    pub fn success_rate(&self) -> Result<f64, CurriculumError> {
        if self.window.is_empty() {
            return Err(CurriculumError::EmptyWindow);
        }
        let hits = self.window.iter().filter(|&&s| s).count();
        Ok(hits as f64 / self.window.len() as f64)
    }

    pub fn record_episode(&mut self, outcome: &EpisodeOutcome) -> Option<Transition> {
        if self.window.len() == WINDOW {
            self.window.pop_front();
        }
        self.window.push_back(outcome.success);
        if self.mode != CurriculumMode::Incremental || self.window.len() < WINDOW {
            return None;
        }
        let rate = self.success_rate().ok()?;
        let t = &self.thresholds;
        let to = match self.current {
            EnvId::Env1 if rate > t.alpha1 => EnvId::Env2,
            EnvId::Env2 if rate > t.alpha2 => EnvId::Env3,
            EnvId::Env2 if rate < t.beta1 => EnvId::Env1,
            EnvId::Env3 if rate < t.beta2 => EnvId::Env2,
            _ => return None,
        };
        let tr = Transition {
            episode_index: outcome.episode_index,
            from: self.current,
            to,
            window_rate: rate,
        };
        self.current = to;
        self.window.clear();
        self.log.push(tr);
        Some(tr)
    }

    pub fn write_log_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_transitions_csv(&self.log, out)
    }
}

pub fn write_transitions_csv<W: Write>(log: &[Transition], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode_index", "from_env", "to_env", "window_rate"])?;
    for t in log {
        w.write_record([
            t.episode_index.to_string(),
            t.from.number().to_string(),
            t.to.number().to_string(),
            t.window_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Env active at `episode` given a start env and transition log.
pub fn env_at(start: EnvId, log: &[Transition], episode: u64) -> EnvId {
    log.iter()
        .take_while(|t| t.episode_index < episode)
        .last()
        .map_or(start, |t| t.to)
}
