//! Two-layer MLP policy over a scalar observation with a sigmoid head.
//!
//! `p(a = 1 | s) = sigmoid(w2 . act(w1 * s + b1) + b2)`. Gradients of the
//! Bernoulli log-likelihood and of the squared error to a target probability
//! are written out by hand; both reduce to a scalar gradient at the logit that
//! is then pushed through the hidden layer by [`PolicyParams::backprop`].

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    #[inline]
    fn derivative<T: Scalar>(self, pre: T, out: T) -> T {
        match self {
            Activation::Tanh => T::one() - out * out,
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(format!("unknown activation `{other}` (expected tanh|relu)")),
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams<T> {
    pub hidden: usize,
    #[serde(default)]
    pub activation: Activation,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: T,
}

/// Gradient with the same layout as [`PolicyParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyGrads<T> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: T,
}

/// Intermediate values of one forward pass, consumed by the gradient ops.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache<T> {
    pub s: T,
    pub pre: Vec<T>,
    pub h: Vec<T>,
    pub logit: T,
    pub p: T,
}

impl<T: Scalar> PolicyParams<T> {
    /// Uniform `±1/sqrt(fan_in)` weights, zero biases.
    pub fn init<R: Rng + ?Sized>(hidden: usize, activation: Activation, rng: &mut R) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::contract("hidden width must be at least 1"));
        }
        let bound2 = 1.0 / (hidden as f64).sqrt();
        let w1 = (0..hidden).map(|_| T::lit(rng.random_range(-1.0..=1.0))).collect();
        let w2 = (0..hidden)
            .map(|_| T::lit(rng.random_range(-bound2..=bound2)))
            .collect();
        Ok(Self {
            hidden,
            activation,
            w1,
            b1: vec![T::zero(); hidden],
            w2,
            b2: T::zero(),
        })
    }

    pub fn zeros(hidden: usize, activation: Activation) -> Self {
        Self {
            hidden,
            activation,
            w1: vec![T::zero(); hidden],
            b1: vec![T::zero(); hidden],
            w2: vec![T::zero(); hidden],
            b2: T::zero(),
        }
    }

    pub fn num_params(&self) -> usize {
        3 * self.hidden + 1
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(std::iter::once(&mut self.b2))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::contract("hidden width must be at least 1"));
        }
        for (name, len) in [("w1", self.w1.len()), ("b1", self.b1.len()), ("w2", self.w2.len())] {
            if len != self.hidden {
                return Err(Error::contract(format!(
                    "{name} has {len} entries, expected hidden = {}",
                    self.hidden
                )));
            }
        }
        if !self.is_finite() {
            return Err(Error::contract("policy parameters must be finite"));
        }
        Ok(())
    }

    pub fn forward(&self, s: T) -> ForwardCache<T> {
        let pre: Vec<T> = self.w1.iter().zip(&self.b1).map(|(&w, &b)| w * s + b).collect();
        let h: Vec<T> = pre.iter().map(|&x| self.activation.apply(x)).collect();
        let logit = self.w2.iter().zip(&h).map(|(&w, &hj)| w * hj).sum::<T>() + self.b2;
        let eps = T::epsilon();
        let p = sigmoid(logit).max(eps).min(T::one() - eps);
        ForwardCache { s, pre, h, logit, p }
    }

    /// Action probability without keeping the cache.
    pub fn prob(&self, s: T) -> T {
        self.forward(s).p
    }

    /// `log p(action | s)` computed from the logit.
    pub fn log_prob(&self, s: T, action: Action) -> T {
        let logit = self.forward(s).logit;
        match action {
            Action::Act => -softplus(-logit),
            Action::Wait => -softplus(logit),
        }
    }

    /// Pushes a gradient at the logit back to every parameter.
    pub fn backprop(&self, dlogit: T, cache: &ForwardCache<T>) -> PolicyGrads<T> {
        let mut grads = PolicyGrads::zeros(self.hidden);
        grads.b2 = dlogit;
        for j in 0..self.hidden {
            grads.w2[j] = dlogit * cache.h[j];
            let dpre = dlogit * self.w2[j] * self.activation.derivative(cache.pre[j], cache.h[j]);
            grads.b1[j] = dpre;
            grads.w1[j] = dpre * cache.s;
        }
        grads
    }

    /// Gradient of `log p(action | s)`; the logit-level term is `a - p`.
    pub fn grad_logprob(&self, action: Action, cache: &ForwardCache<T>) -> PolicyGrads<T> {
        self.backprop(action.indicator::<T>() - cache.p, cache)
    }

    /// Gradient of `(p - target)^2`; the logit-level term is
    /// `2 (p - target) p (1 - p)`.
    pub fn grad_mse(&self, target: T, cache: &ForwardCache<T>) -> PolicyGrads<T> {
        let p = cache.p;
        let two = T::lit(2.0);
        self.backprop(two * (p - target) * p * (T::one() - p), cache)
    }

    /// Applies `params += scale * grads`.
    pub fn add_scaled(&mut self, grads: &PolicyGrads<T>, scale: T) {
        for (p, g) in self.values_mut().zip(grads.values()) {
            *p = *p + scale * *g;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let params: Self = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl<T: Scalar> PolicyGrads<T> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            w1: vec![T::zero(); hidden],
            b1: vec![T::zero(); hidden],
            w2: vec![T::zero(); hidden],
            b2: T::zero(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(std::iter::once(&mut self.b2))
    }

    /// `self += scale * other`.
    pub fn accumulate(&mut self, other: &PolicyGrads<T>, scale: T) {
        for (a, &b) in self.values_mut().zip(other.values()) {
            *a = *a + scale * b;
        }
    }

    pub fn scale(&mut self, k: T) {
        for v in self.values_mut() {
            *v = *v * k;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.values().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}
