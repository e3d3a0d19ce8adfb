use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::replay::{Batch, ReplayBuffer};
use super::SacError;
use crate::nn::{
    ActionBounds, AdamConfig, AdamState, GaussianPolicyHead, Gradients, Matrix, Mlp, ACTION_DIM,
    TANH_EPS,
};
use crate::simworld::Action;

/// SAC hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    /// Hidden layer widths shared by the policy, Q and V networks.
    pub hidden: Vec<usize>,
    /// Entropy temperature.
    pub alpha: f64,
    pub gamma: f64,
    /// Target smoothing coefficient for the value target.
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    pub adam: AdamConfig,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            alpha: 0.2,
            gamma: 0.99,
            tau: 5e-2,
            batch_size: 256,
            replay_capacity: 1_000_000,
            warmup: 1_000,
            adam: AdamConfig::default(),
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), SacError> {
        let bad = |field, reason: &str| {
            Err(SacError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden", "needs at least one layer, all widths > 0");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha", "must be finite and >= 0");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma", "must lie in (0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", "must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be > 0");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity", "must hold at least one batch");
        }
        if !(self.adam.lr > 0.0) {
            return bad("adam.lr", "must be > 0");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionMode {
    Stochastic,
    Deterministic,
}

/// Squashed action and the actuator command it maps to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionChoice {
    pub normalized: [f64; ACTION_DIM],
    pub command: Action,
}

/// Scalar loss with its parameter gradients.
#[derive(Clone, Debug)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: Gradients,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub q: f64,
    pub v: f64,
    pub policy: f64,
}

/// Read-only copy of the policy, for evaluation workers.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySnapshot {
    pub policy: Mlp,
    pub bounds: ActionBounds,
}

impl PolicySnapshot {
    pub fn head(&self, state: &[f64]) -> Result<GaussianPolicyHead, SacError> {
        if state.len() != self.policy.input_dim() {
            return Err(SacError::StateDim {
                expected: self.policy.input_dim(),
                got: state.len(),
            });
        }
        let out = self
            .policy
            .predict(&Matrix::from_vec(1, state.len(), state.to_vec()))?;
        Ok(GaussianPolicyHead::from_output(out.row(0)))
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        mode: ActionMode,
        rng: &mut R,
    ) -> Result<ActionChoice, SacError> {
        act_with(&self.policy, self.bounds, state, mode, rng)
    }
}

fn act_with<R: Rng + ?Sized>(
    policy: &Mlp,
    bounds: ActionBounds,
    state: &[f64],
    mode: ActionMode,
    rng: &mut R,
) -> Result<ActionChoice, SacError> {
    if state.len() != policy.input_dim() {
        return Err(SacError::StateDim {
            expected: policy.input_dim(),
            got: state.len(),
        });
    }
    let out = policy.predict(&Matrix::from_vec(1, state.len(), state.to_vec()))?;
    let head = GaussianPolicyHead::from_output(out.row(0));
    let normalized = match mode {
        ActionMode::Deterministic => head.mode(),
        ActionMode::Stochastic => head.sample_squashed(draw_noise(rng)).action,
    };
    Ok(ActionChoice {
        normalized,
        command: bounds.to_command(normalized),
    })
}

fn draw_noise<R: Rng + ?Sized>(rng: &mut R) -> [f64; ACTION_DIM] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

/// Standard-normal noise for every row of a batch.
pub(crate) fn batch_noise<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<[f64; ACTION_DIM]> {
    (0..n).map(|_| draw_noise(rng)).collect()
}

/// `[states | actions]` row by row.
fn concat_cols(states: &Matrix, actions: &Matrix) -> Matrix {
    let (n, ds, da) = (states.rows(), states.cols(), actions.cols());
    let mut out = Vec::with_capacity(n * (ds + da));
    for r in 0..n {
        out.extend_from_slice(states.row(r));
        out.extend_from_slice(actions.row(r));
    }
    Matrix::from_vec(n, ds + da, out)
}

struct PolicyDraw {
    actions: Matrix,
    log_probs: Vec<f64>,
    heads: Vec<GaussianPolicyHead>,
}

fn draw_actions(policy_out: &Matrix, noise: &[[f64; ACTION_DIM]]) -> PolicyDraw {
    let n = policy_out.rows();
    let mut actions = Vec::with_capacity(n * ACTION_DIM);
    let mut log_probs = Vec::with_capacity(n);
    let mut heads = Vec::with_capacity(n);
    for (r, eps) in noise.iter().enumerate().take(n) {
        let head = GaussianPolicyHead::from_output(policy_out.row(r));
        let s = head.sample_squashed(*eps);
        actions.extend_from_slice(&s.action);
        log_probs.push(s.log_prob);
        heads.push(head);
    }
    PolicyDraw {
        actions: Matrix::from_vec(n, ACTION_DIM, actions),
        log_probs,
        heads,
    }
}

/// Policy, soft Q-function, soft value function and its target.
#[derive(Clone, Debug)]
pub struct SacAgent {
    cfg: SacConfig,
    bounds: ActionBounds,
    state_dim: usize,
    pub(crate) policy: Mlp,
    pub(crate) q: Mlp,
    pub(crate) value: Mlp,
    pub(crate) value_target: Mlp,
    pub(crate) policy_opt: AdamState,
    pub(crate) q_opt: AdamState,
    pub(crate) value_opt: AdamState,
    pub(crate) train_steps: u64,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        cfg: SacConfig,
        bounds: ActionBounds,
        rng: &mut R,
    ) -> Result<Self, SacError> {
        cfg.validate()?;
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend_from_slice(&cfg.hidden);
            s.push(output);
            s
        };
        let policy = Mlp::new(&sizes(state_dim, 2 * ACTION_DIM), rng);
        let q = Mlp::new(&sizes(state_dim + ACTION_DIM, 1), rng);
        let value = Mlp::new(&sizes(state_dim, 1), rng);
        let mut value_target = value.clone();
        // hard update
        value_target.soft_update_from(&value, 1.0);
        Ok(Self {
            policy_opt: AdamState::for_network(&policy),
            q_opt: AdamState::for_network(&q),
            value_opt: AdamState::for_network(&value),
            cfg,
            bounds,
            state_dim,
            policy,
            q,
            value,
            value_target,
            train_steps: 0,
        })
    }

    pub(crate) fn from_parts(parts: AgentParts) -> Self {
        Self {
            cfg: parts.cfg,
            bounds: parts.bounds,
            state_dim: parts.policy.input_dim(),
            policy: parts.policy,
            q: parts.q,
            value: parts.value,
            value_target: parts.value_target,
            policy_opt: parts.policy_opt,
            q_opt: parts.q_opt,
            value_opt: parts.value_opt,
            train_steps: parts.train_steps,
        }
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn config_mut(&mut self) -> &mut SacConfig {
        &mut self.cfg
    }

    pub fn bounds(&self) -> ActionBounds {
        self.bounds
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn policy(&self) -> &Mlp {
        &self.policy
    }

    pub fn q(&self) -> &Mlp {
        &self.q
    }

    pub fn value(&self) -> &Mlp {
        &self.value
    }

    pub fn value_target(&self) -> &Mlp {
        &self.value_target
    }

    pub fn policy_mut(&mut self) -> &mut Mlp {
        &mut self.policy
    }

    pub fn q_mut(&mut self) -> &mut Mlp {
        &mut self.q
    }

    pub fn value_mut(&mut self) -> &mut Mlp {
        &mut self.value
    }

    pub fn value_target_mut(&mut self) -> &mut Mlp {
        &mut self.value_target
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot {
            policy: self.policy.clone(),
            bounds: self.bounds,
        }
    }

    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        mode: ActionMode,
        rng: &mut R,
    ) -> Result<ActionChoice, SacError> {
        act_with(&self.policy, self.bounds, state, mode, rng)
    }

    fn check_batch(&self, batch: &Batch) -> Result<(), SacError> {
        if batch.is_empty() {
            return Err(SacError::InsufficientData { have: 0, need: 1 });
        }
        if batch.states.cols() != self.state_dim {
            return Err(SacError::StateDim {
                expected: self.state_dim,
                got: batch.states.cols(),
            });
        }
        Ok(())
    }

    /// Soft Bellman residual `mean 0.5 (Q(s,a) - (r + gamma (1 - done) V_target(s')))^2`.
    ///
    /// The bootstrap target is a constant; gradients are w.r.t. the Q-network only.
    pub fn q_loss(&self, batch: &Batch) -> Result<LossGrad, SacError> {
        self.check_batch(batch)?;
        let n = batch.len();
        let v_next = self.value_target.predict(&batch.next_states)?;
        let (q, cache) = self
            .q
            .forward(&concat_cols(&batch.states, &batch.actions))?;
        let mut up = Matrix::zeros(n, 1);
        let mut loss = 0.0;
        for i in 0..n {
            let mask = if batch.dones[i] { 0.0 } else { 1.0 };
            let target = batch.rewards[i] + self.cfg.gamma * mask * v_next.get(i, 0);
            let diff = q.get(i, 0) - target;
            loss += 0.5 * diff * diff;
            up.as_mut_slice()[i] = diff / n as f64;
        }
        let (grads, _) = self.q.backward(&cache, &up)?;
        Ok(LossGrad {
            loss: loss / n as f64,
            grads,
        })
    }

    /// Value regression onto `Q(s, a~) - alpha log pi(a~|s)` with `a~` drawn
    /// from the current policy using the given standard-normal `noise`.
    pub fn v_loss_with_noise(
        &self,
        batch: &Batch,
        noise: &[[f64; ACTION_DIM]],
    ) -> Result<LossGrad, SacError> {
        self.check_batch(batch)?;
        let n = batch.len();
        assert_eq!(noise.len(), n, "one noise draw per row");
        let draw = draw_actions(&self.policy.predict(&batch.states)?, noise);
        let q_new = self.q.predict(&concat_cols(&batch.states, &draw.actions))?;
        let (v, cache) = self.value.forward(&batch.states)?;
        let mut up = Matrix::zeros(n, 1);
        let mut loss = 0.0;
        for i in 0..n {
            let target = q_new.get(i, 0) - self.cfg.alpha * draw.log_probs[i];
            let diff = v.get(i, 0) - target;
            loss += 0.5 * diff * diff;
            up.as_mut_slice()[i] = diff / n as f64;
        }
        let (grads, _) = self.value.backward(&cache, &up)?;
        Ok(LossGrad {
            loss: loss / n as f64,
            grads,
        })
    }

    pub fn v_loss<R: Rng + ?Sized>(
        &self,
        batch: &Batch,
        rng: &mut R,
    ) -> Result<LossGrad, SacError> {
        let noise = batch_noise(rng, batch.len());
        self.v_loss_with_noise(batch, &noise)
    }

    /// Reparameterized policy objective `mean(alpha log pi(a~|s) - Q(s, a~))`.
    ///
    /// Gradients flow through `a~ = tanh(mean + std * noise)` into the policy;
    /// the Q-network is held fixed.
    pub fn policy_loss_with_noise(
        &self,
        batch: &Batch,
        noise: &[[f64; ACTION_DIM]],
    ) -> Result<LossGrad, SacError> {
        self.check_batch(batch)?;
        let n = batch.len();
        assert_eq!(noise.len(), n, "one noise draw per row");
        let inv_n = 1.0 / n as f64;
        let alpha = self.cfg.alpha;

        let (out, p_cache) = self.policy.forward(&batch.states)?;
        let draw = draw_actions(&out, noise);
        let (q_new, q_cache) = self.q.forward(&concat_cols(&batch.states, &draw.actions))?;

        let mut loss = 0.0;
        for i in 0..n {
            loss += alpha * draw.log_probs[i] - q_new.get(i, 0);
        }

        let q_up = Matrix::from_vec(n, 1, vec![-inv_n; n]);
        let dq_in = self.q.backward_input(&q_cache, &q_up)?;

        let mut up = Matrix::zeros(n, 2 * ACTION_DIM);
        for i in 0..n {
            let head = &draw.heads[i];
            let row = up.row_mut(i);
            for j in 0..ACTION_DIM {
                let a = draw.actions.get(i, j);
                let one_minus = 1.0 - a * a;
                // d(-Q/n)/da, chained through tanh
                let mut d_u = dq_in.get(i, self.state_dim + j) * one_minus;
                // d(alpha/n * -ln(1 - a^2 + eps))/du
                d_u += alpha * inv_n * 2.0 * a * one_minus / (one_minus + TANH_EPS);
                row[j] = d_u;
                row[ACTION_DIM + j] = if head.clamped[j] {
                    0.0
                } else {
                    d_u * head.log_std[j].exp() * noise[i][j] - alpha * inv_n
                };
            }
        }
        let (grads, _) = self.policy.backward(&p_cache, &up)?;
        Ok(LossGrad {
            loss: loss * inv_n,
            grads,
        })
    }

    pub fn policy_loss<R: Rng + ?Sized>(
        &self,
        batch: &Batch,
        rng: &mut R,
    ) -> Result<LossGrad, SacError> {
        let noise = batch_noise(rng, batch.len());
        self.policy_loss_with_noise(batch, &noise)
    }

    /// `V_target <- tau V + (1 - tau) V_target`; `tau = 1` is a hard copy.
    pub fn soft_update(&mut self, tau: f64) {
        self.value_target.soft_update_from(&self.value, tau);
    }

    /// One full update on `batch`: Q, then V, then the policy, then the target.
    pub fn update_on_batch<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        rng: &mut R,
    ) -> Result<LossReport, SacError> {
        let adam = self.cfg.adam.clone();
        let q = self.q_loss(batch)?;
        self.q_opt.step_network(&adam, &mut self.q, &q.grads);

        let v = self.v_loss(batch, rng)?;
        self.value_opt
            .step_network(&adam, &mut self.value, &v.grads);

        let p = self.policy_loss(batch, rng)?;
        self.policy_opt
            .step_network(&adam, &mut self.policy, &p.grads);

        self.soft_update(self.cfg.tau);
        self.train_steps += 1;
        Ok(LossReport {
            q: q.loss,
            v: v.loss,
            policy: p.loss,
        })
    }

    /// Sample a minibatch and update; errors without touching parameters if
    /// the buffer cannot fill a batch.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut R,
    ) -> Result<LossReport, SacError> {
        let need = self.cfg.batch_size;
        let batch = buffer.sample(rng, need).ok_or(SacError::InsufficientData {
            have: buffer.len(),
            need,
        })?;
        self.update_on_batch(&batch, rng)
    }
}

pub(crate) struct AgentParts {
    pub cfg: SacConfig,
    pub bounds: ActionBounds,
    pub policy: Mlp,
    pub q: Mlp,
    pub value: Mlp,
    pub value_target: Mlp,
    pub policy_opt: AdamState,
    pub q_opt: AdamState,
    pub value_opt: AdamState,
    pub train_steps: u64,
}
