use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, HarnessError};
use crate::curriculum::{CurriculumMode, Thresholds};
use crate::observation::ObsVariant;
use crate::reward::RewardConfig;
use crate::sac::{SacConfig, SacError};
use crate::simworld::{SimError, SimParams};

/// Everything a training run depends on. Loaded from JSON; unknown keys are
/// rejected at every level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub obs_variant: ObsVariant,
    pub curriculum_mode: CurriculumMode,
    pub total_episodes: u64,
    pub max_steps: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub checkpoint_every: u64,
    pub sim: SimParams,
    pub reward: RewardConfig,
    pub sac: SacConfig,
    pub curriculum: Thresholds,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            obs_variant: ObsVariant::O3,
            curriculum_mode: CurriculumMode::Incremental,
            total_episodes: 5000,
            max_steps: 500,
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            checkpoint_every: 500,
            sim: SimParams::default(),
            reward: RewardConfig::default(),
            sac: SacConfig::default(),
            curriculum: Thresholds::default(),
        }
    }
}

fn field_err(field: impl Into<String>, reason: impl ToString) -> HarnessError {
    HarnessError::Config {
        field: field.into(),
        reason: reason.to_string(),
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.total_episodes == 0 {
            return Err(field_err("total_episodes", "must be > 0"));
        }
        if self.max_steps == 0 {
            return Err(field_err("max_steps", "must be > 0"));
        }
        if self.checkpoint_every == 0 {
            return Err(field_err("checkpoint_every", "must be > 0"));
        }
        self.sim.validate().map_err(|e| match e {
            SimError::InvalidParam { field, reason } => field_err(format!("sim.{field}"), reason),
            other => field_err("sim", other),
        })?;
        self.reward.validate().map_err(|e| field_err("reward", e))?;
        self.sac.validate().map_err(|e| match e {
            SacError::InvalidConfig { field, reason } => field_err(format!("sac.{field}"), reason),
            other => field_err("sac", other),
        })?;
        self.curriculum
            .validate()
            .map_err(|e| field_err("curriculum", e))?;
        if self.sim.d_min != self.reward.d_min {
            return Err(field_err("reward.d_min", "must equal sim.d_min"));
        }
        Ok(())
    }
}
