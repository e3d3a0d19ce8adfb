//! Shaped navigation reward.
//!
//! Terminal events dominate: a collision costs `r_collision`, getting within
//! `d_min` of the target pays `r_reached`. Otherwise the step is scored on the
//! distance rate `dR = d_prev - d`: progress pays `C * dR * V_r`, where the
//! velocity factor `V_r` shrinks the payout at high speed and close range;
//! no progress costs `r_recede`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("reward constants must satisfy r_reached > 0 > r_recede > r_collision")]
    BadOrdering,
    #[error("`{field}` must be finite and > 0")]
    NonPositive { field: &'static str },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Gain `C` on the progress term.
    pub gain: f64,
    pub r_reached: f64,
    pub r_collision: f64,
    pub r_recede: f64,
    pub d_min: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            gain: 200.0,
            r_reached: 500.0,
            r_collision: -550.0,
            r_recede: -10.0,
            d_min: 0.3,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.r_reached > 0.0 && 0.0 > self.r_recede && self.r_recede > self.r_collision) {
            return Err(RewardError::BadOrdering);
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(RewardError::NonPositive { field: "gain" });
        }
        if !(self.d_min.is_finite() && self.d_min > 0.0) {
            return Err(RewardError::NonPositive { field: "d_min" });
        }
        Ok(())
    }
}

/// Which case of the reward function fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardBranch {
    Collision,
    Reached,
    Progress,
    Recede,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardOutcome {
    pub reward: f64,
    pub terminal: bool,
    pub branch: RewardBranch,
}

/// `V_r = (1 - max(v, 0.1))^(1 / max(d, 0.1))` with `v` first clamped to [0, 1].
pub fn velocity_factor(v: f64, d: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    (1.0 - v.max(0.1)).powf(1.0 / d.max(0.1))
}

/// Reward for the step that moved the robot from `d_prev` to `d` at speed `v`.
///
/// Priority: collision, then reached, then the distance-rate branches.
pub fn compute_reward(
    d: f64,
    d_prev: f64,
    v: f64,
    collision: bool,
    cfg: &RewardConfig,
) -> RewardOutcome {
    if collision {
        return RewardOutcome {
            reward: cfg.r_collision,
            terminal: true,
            branch: RewardBranch::Collision,
        };
    }
    if d < cfg.d_min {
        return RewardOutcome {
            reward: cfg.r_reached,
            terminal: true,
            branch: RewardBranch::Reached,
        };
    }
    let rate = d_prev - d;
    if rate > 0.0 {
        RewardOutcome {
            reward: cfg.gain * rate * velocity_factor(v, d),
            terminal: false,
            branch: RewardBranch::Progress,
        }
    } else {
        RewardOutcome {
            reward: cfg.r_recede,
            terminal: false,
            branch: RewardBranch::Recede,
        }
    }
}
