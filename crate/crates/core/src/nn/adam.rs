use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self {
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn for_network(net: &Mlp) -> Self {
        Self::new(net.param_count())
    }

    /// One update over parameter/gradient slices visited in matching order.
    ///
    /// Panics if the total length differs from the state's.
    pub fn update<'p, 'g>(
        &mut self,
        cfg: &AdamConfig,
        params: impl IntoIterator<Item = &'p mut [f64]>,
        grads: impl IntoIterator<Item = &'g [f64]>,
    ) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powf(self.t as f64);
        let bc2 = 1.0 - cfg.beta2.powf(self.t as f64);
        let mut offset = 0;
        for (p, g) in params.into_iter().zip(grads) {
            assert_eq!(p.len(), g.len(), "parameter/gradient slice length");
            let m = &mut self.m[offset..offset + p.len()];
            let v = &mut self.v[offset..offset + p.len()];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            offset += p.len();
        }
        assert_eq!(offset, self.m.len(), "adam state size");
    }

    pub fn step_network(&mut self, cfg: &AdamConfig, net: &mut Mlp, grads: &Gradients) {
        self.update(cfg, net.param_slices_mut(), grads.slices());
    }
}
