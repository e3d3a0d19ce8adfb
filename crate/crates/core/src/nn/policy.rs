use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::simworld::Action;

/// Linear and angular velocity channels.
pub const ACTION_DIM: usize = 2;
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Keeps the tanh Jacobian term finite at saturation.
pub const TANH_EPS: f64 = 1e-6;

/// One reparameterized draw through a tanh squash.
///
/// Returns `(u, tanh(u), log-density contribution)` for `u = mean + exp(log_std) * noise`.
pub fn squash_channel(mean: f64, log_std: f64, noise: f64) -> (f64, f64, f64) {
    let u = mean + log_std.exp() * noise;
    let a = u.tanh();
    let logp =
        -0.5 * noise * noise - log_std - 0.5 * (2.0 * PI).ln() - (1.0 - a * a + TANH_EPS).ln();
    (u, a, logp)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquashedSample<const N: usize = ACTION_DIM> {
    /// Pre-squash Gaussian draw.
    pub u: [f64; N],
    /// Squashed action in (-1, 1) per channel.
    pub action: [f64; N],
    pub log_prob: f64,
}

/// Diagonal Gaussian over the pre-squash action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPolicyHead<const N: usize = ACTION_DIM> {
    pub mean: [f64; N],
    /// Clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: [f64; N],
    /// Which channels hit the clamp (their log-std gradient is zero).
    pub clamped: [bool; N],
}

impl<const N: usize> GaussianPolicyHead<N> {
    pub fn new(mean: [f64; N], raw_log_std: [f64; N]) -> Self {
        let mut log_std = [0.0; N];
        let mut clamped = [false; N];
        for i in 0..N {
            log_std[i] = raw_log_std[i].clamp(LOG_STD_MIN, LOG_STD_MAX);
            clamped[i] = log_std[i] != raw_log_std[i];
        }
        Self {
            mean,
            log_std,
            clamped,
        }
    }

    /// Split a policy-network output row `[mean; raw_log_std]`.
    ///
    /// Panics if the row is not `2 * N` long.
    pub fn from_output(row: &[f64]) -> Self {
        assert_eq!(row.len(), 2 * N, "policy output width");
        let mut mean = [0.0; N];
        let mut raw = [0.0; N];
        mean.copy_from_slice(&row[..N]);
        raw.copy_from_slice(&row[N..]);
        Self::new(mean, raw)
    }

    pub fn sample_squashed(&self, noise: [f64; N]) -> SquashedSample<N> {
        let mut u = [0.0; N];
        let mut action = [0.0; N];
        let mut log_prob = 0.0;
        for i in 0..N {
            let (ui, ai, lp) = squash_channel(self.mean[i], self.log_std[i], noise[i]);
            u[i] = ui;
            action[i] = ai;
            log_prob += lp;
        }
        SquashedSample {
            u,
            action,
            log_prob,
        }
    }

    /// Deterministic action `tanh(mean)`.
    pub fn mode(&self) -> [f64; N] {
        self.mean.map(f64::tanh)
    }

    /// Log-density of a squashed action in (-1, 1).
    pub fn log_prob_of(&self, action: [f64; N]) -> f64 {
        (0..N)
            .map(|i| {
                let u = action[i].atanh();
                let noise = (u - self.mean[i]) / self.log_std[i].exp();
                squash_channel(self.mean[i], self.log_std[i], noise).2
            })
            .sum()
    }
}

/// Affine map from squashed actions to actuator commands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub v_max: f64,
    pub w_max: f64,
}

impl ActionBounds {
    /// `v = (a0 + 1) / 2 * v_max`, `w = a1 * w_max`.
    pub fn to_command(&self, a: [f64; ACTION_DIM]) -> Action {
        Action {
            v: ((a[0] + 1.0) * 0.5 * self.v_max).clamp(0.0, self.v_max),
            w: (a[1] * self.w_max).clamp(-self.w_max, self.w_max),
        }
    }

    pub fn to_normalized(&self, cmd: Action) -> [f64; ACTION_DIM] {
        [2.0 * cmd.v / self.v_max - 1.0, cmd.w / self.w_max]
    }
}
