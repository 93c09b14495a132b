//! REINFORCE training with an optional dynamical-prior auxiliary loss.
//!
//! Per episode the loss is
//!
//! ```text
//! L = -(1/T) sum_t G_t log p(a_t | s_t)  +  lambda (1/T) sum_t (p_t - z_t)^2
//! ```
//!
//! where the second term is present only for [`AgentKind::DpRl`] and `z_t` is
//! the hysteretic filter output on the episode's own signal. One Adam step is
//! taken per episode. Both agents share the policy module, reward function and
//! random streams, so with `lambda = 0` they follow bit-identical parameter
//! trajectories.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{self, Action, EnvConfig, EnvKind, EpisodeSignal};
use crate::error::{Error, Result};
use crate::esd::{self, EsdParams};
use crate::optim::{Adam, AdamConfig};
use crate::policy::{Activation, PolicyGrads, PolicyParams};
use crate::scalar::Scalar;
use crate::streams::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "reinforce")]
    Reinforce,
    #[serde(rename = "dprl")]
    DpRl,
}

impl AgentKind {
    pub const ALL: [AgentKind; 2] = [AgentKind::Reinforce, AgentKind::DpRl];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Reinforce => "reinforce",
            AgentKind::DpRl => "dprl",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "reinforce" => Ok(AgentKind::Reinforce),
            "dprl" | "dp_rl" => Ok(AgentKind::DpRl),
            other => Err(format!("unknown agent `{other}` (expected reinforce|dprl)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub adam: AdamConfig,
    pub hidden: usize,
    pub activation: Activation,
    /// Standardise returns within each episode before weighting.
    pub normalize_returns: bool,
    /// Set per run from the cell seed; not part of the recorded config.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 800,
            gamma: 0.99,
            lambda: 2.0,
            adam: AdamConfig::default(),
            hidden: 32,
            activation: Activation::Tanh,
            normalize_returns: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(
                "train.gamma",
                format!("must lie in (0, 1], got {}", self.gamma),
            ));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config(
                "train.lambda",
                format!("must be finite and >= 0, got {}", self.lambda),
            ));
        }
        if !(self.adam.learn_rate.is_finite() && self.adam.learn_rate > 0.0) {
            return Err(Error::config(
                "train.learn_rate",
                format!("must be positive, got {}", self.adam.learn_rate),
            ));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) {
            return Err(Error::config("train.adam_beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(Error::config("train.adam_beta2", "must lie in [0, 1)"));
        }
        if !(self.adam.eps.is_finite() && self.adam.eps > 0.0) {
            return Err(Error::config("train.adam_eps", "must be positive"));
        }
        if self.hidden == 0 {
            return Err(Error::config("train.hidden", "must be at least 1"));
        }
        Ok(())
    }
}

/// Everything observed in one training episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord<T> {
    pub signal: EpisodeSignal<T>,
    pub actions: Vec<Action>,
    pub rewards: Vec<T>,
    pub probs: Vec<T>,
    /// Filter targets; present for the prior-regularised agent only.
    pub targets: Option<Vec<T>>,
}

impl<T: Scalar> EpisodeRecord<T> {
    pub fn total_reward(&self) -> T {
        self.rewards.iter().copied().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub rl_loss: f64,
    pub esd_loss: Option<f64>,
}

impl LossReport {
    fn is_finite(&self) -> bool {
        self.rl_loss.is_finite() && self.esd_loss.is_none_or(f64::is_finite)
    }
}

/// One row of the learning curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub total_reward: f64,
    pub rl_loss: f64,
    pub esd_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<T> {
    pub params: PolicyParams<T>,
    pub curve: Vec<CurvePoint>,
}

/// Discounted returns `G_t = r_t + gamma G_{t+1}` with `G_{T+1} = 0`.
pub fn compute_returns<T: Scalar>(rewards: &[T], gamma: T) -> Result<Vec<T>> {
    if rewards.is_empty() {
        return Err(Error::contract("cannot compute returns of an empty episode"));
    }
    let mut out = vec![T::zero(); rewards.len()];
    let mut acc = T::zero();
    for (g, &r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *g = acc;
    }
    Ok(out)
}

fn standardize<T: Scalar>(xs: &mut [T]) {
    let n = T::from_usize_exact(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let sd = var.sqrt() + T::lit(1e-8);
    for x in xs {
        *x = (*x - mean) / sd;
    }
}

/// Shared context of one training run: environment, agent and objective.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub env_kind: EnvKind,
    pub agent: AgentKind,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub esd: EsdParams<T>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(
        env_kind: EnvKind,
        agent: AgentKind,
        env: EnvConfig,
        train: TrainConfig,
        esd: EsdParams<T>,
    ) -> Result<Self> {
        env.validate()?;
        train.validate()?;
        esd.validate()?;
        Ok(Self {
            env_kind,
            agent,
            env,
            train,
            esd,
        })
    }

    /// Samples actions along `signal` from the current policy.
    pub fn run_episode<R: Rng + ?Sized>(
        &self,
        policy: &PolicyParams<T>,
        signal: EpisodeSignal<T>,
        rng: &mut R,
    ) -> Result<EpisodeRecord<T>> {
        let horizon = signal.horizon();
        let mut actions = Vec::with_capacity(horizon);
        let mut rewards = Vec::with_capacity(horizon);
        let mut probs = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let p = policy.prob(signal.at(t));
            let u: f64 = rng.random();
            let action = Action::from_bit(T::lit(u) < p);
            rewards.push(env::reward(&signal, t, action, &self.env)?);
            actions.push(action);
            probs.push(p);
        }
        let targets = match self.agent {
            AgentKind::Reinforce => None,
            AgentKind::DpRl => Some(esd::trajectory(&signal.s, &self.esd)?),
        };
        Ok(EpisodeRecord {
            signal,
            actions,
            rewards,
            probs,
            targets,
        })
    }

    /// Gradient and loss values of the per-episode objective at `policy`,
    /// with actions, returns and targets held fixed.
    pub fn episode_gradient(
        &self,
        policy: &PolicyParams<T>,
        record: &EpisodeRecord<T>,
    ) -> Result<(PolicyGrads<T>, LossReport)> {
        let horizon = record.signal.horizon();
        let targets = match (self.agent, &record.targets) {
            (AgentKind::DpRl, Some(z)) => Some(z),
            (AgentKind::DpRl, None) => return Err(Error::contract("prior-regularised update needs filter targets")),
            (AgentKind::Reinforce, _) => None,
        };
        let mut returns = compute_returns(&record.rewards, T::lit(self.train.gamma))?;
        if self.train.normalize_returns {
            standardize(&mut returns);
        }

        let inv_t = T::one() / T::from_usize_exact(horizon);
        let lambda = T::lit(self.train.lambda);
        let mut grads = PolicyGrads::zeros(policy.hidden);
        let mut rl_loss = T::zero();
        let mut esd_loss = T::zero();
        for t in 0..horizon {
            let s = record.signal.s[t];
            let cache = policy.forward(s);
            let action = record.actions[t];
            let g = returns[t];

            rl_loss = rl_loss - g * policy.log_prob(s, action);
            grads.accumulate(&policy.grad_logprob(action, &cache), -g * inv_t);

            if let Some(z) = targets {
                let diff = cache.p - z[t];
                esd_loss = esd_loss + diff * diff;
                // lambda = 0 must reproduce plain REINFORCE bit for bit
                if lambda > T::zero() {
                    grads.accumulate(&policy.grad_mse(z[t], &cache), lambda * inv_t);
                }
            }
        }
        let report = LossReport {
            rl_loss: (rl_loss * inv_t).to_f64_lossy(),
            esd_loss: targets.map(|_| (esd_loss * inv_t).to_f64_lossy()),
        };
        Ok((grads, report))
    }

    /// One Adam step on the episode objective.
    pub fn episode_update(
        &self,
        policy: &mut PolicyParams<T>,
        record: &EpisodeRecord<T>,
        opt: &mut Adam<T>,
    ) -> Result<LossReport> {
        let (grads, report) = self.episode_gradient(policy, record)?;
        if report.is_finite() && grads.is_finite() {
            opt.step(policy, &grads);
        }
        Ok(report)
    }

    /// Trains a freshly initialised policy for `train.episodes` episodes.
    pub fn train(&self) -> Result<TrainOutcome<T>> {
        let seed = self.train.seed;
        let mut init_rng = stream_rng(seed, Stream::Init);
        let mut env_rng = stream_rng(seed, Stream::TrainSignals);
        let mut action_rng = stream_rng(seed, Stream::Actions);

        let mut policy = PolicyParams::init(self.train.hidden, self.train.activation, &mut init_rng)?;
        let mut opt = Adam::new(self.train.adam, self.train.hidden);
        let mut curve = Vec::with_capacity(self.train.episodes);
        for episode in 0..self.train.episodes {
            let signal = env::generate(self.env_kind, &self.env, &mut env_rng);
            let record = self.run_episode(&policy, signal, &mut action_rng)?;
            let report = self.episode_update(&mut policy, &record, &mut opt)?;
            if !report.is_finite() || !policy.is_finite() {
                return Err(Error::NonFiniteLoss {
                    episode,
                    rl_loss: report.rl_loss,
                    esd_loss: report.esd_loss.unwrap_or(0.0),
                });
            }
            curve.push(CurvePoint {
                episode,
                total_reward: record.total_reward().to_f64_lossy(),
                rl_loss: report.rl_loss,
                esd_loss: report.esd_loss,
            });
        }
        Ok(TrainOutcome { params: policy, curve })
    }
}
