use serde::{Deserialize, Serialize};

use crate::policy::{PolicyGrads, PolicyParams};
use crate::scalar::Scalar;

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learn_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learn_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment estimates for one policy.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    cfg: AdamConfig,
    step: i32,
    m: PolicyGrads<T>,
    v: PolicyGrads<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, hidden: usize) -> Self {
        Self {
            cfg,
            step: 0,
            m: PolicyGrads::zeros(hidden),
            v: PolicyGrads::zeros(hidden),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// One descent step on `params` along `grads`.
    pub fn step(&mut self, params: &mut PolicyParams<T>, grads: &PolicyGrads<T>) {
        self.step += 1;
        let lr = T::lit(self.cfg.learn_rate);
        let b1 = T::lit(self.cfg.beta1);
        let b2 = T::lit(self.cfg.beta2);
        let eps = T::lit(self.cfg.eps);
        let one = T::one();
        let bias1 = one - b1.powi(self.step);
        let bias2 = one - b2.powi(self.step);

        let moments = self.m.values_mut().zip(self.v.values_mut());
        for ((theta, &g), (m, v)) in params.values_mut().zip(grads.values()).zip(moments) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
