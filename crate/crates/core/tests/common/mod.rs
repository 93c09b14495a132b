//! Reference implementations used as oracles by the integration tests.
//!
//! Everything here is written from the definitions with plain loops and
//! shares no code path with the library beyond the parameter containers.
#![allow(dead_code, clippy::needless_range_loop, clippy::manual_find)]

use dprl::env::{Action, EnvKind, EpisodeSignal, Landmarks};
use dprl::policy::{Activation, PolicyGrads, PolicyParams};
use dprl::trainer::EpisodeRecord;
use rand::Rng;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

pub fn forward_ref(params: &PolicyParams<f64>, s: f64) -> f64 {
    let mut logit = params.b2;
    for j in 0..params.hidden {
        let pre = params.w1[j] * s + params.b1[j];
        let h = match params.activation {
            Activation::Tanh => pre.tanh(),
            Activation::Relu => {
                if pre > 0.0 {
                    pre
                } else {
                    0.0
                }
            }
        };
        logit += params.w2[j] * h;
    }
    1.0 / (1.0 + (-logit).exp())
}

/// `G_t = sum_{k >= t} gamma^(k - t) r_k`, summed term by term.
pub fn returns_direct(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut out = vec![0.0; n];
    for t in 0..n {
        let mut total = 0.0;
        for k in t..n {
            total += gamma.powi((k - t) as i32) * rewards[k];
        }
        out[t] = total;
    }
    out
}

/// `-(1/T) sum_t G_t log pi(a_t | s_t)` with returns held fixed.
pub fn rl_loss_ref(params: &PolicyParams<f64>, s: &[f64], actions: &[Action], returns: &[f64]) -> f64 {
    let mut total = 0.0;
    for t in 0..s.len() {
        let p = forward_ref(params, s[t]);
        let lik = if actions[t] == Action::Act { p } else { 1.0 - p };
        total -= returns[t] * lik.ln();
    }
    total / s.len() as f64
}

/// `(lambda/T) sum_t (p_t - z_t)^2`.
pub fn prior_loss_ref(params: &PolicyParams<f64>, s: &[f64], z: &[f64], lambda: f64) -> f64 {
    let mut total = 0.0;
    for t in 0..s.len() {
        let d = forward_ref(params, s[t]) - z[t];
        total += d * d;
    }
    lambda * total / s.len() as f64
}

/// Central finite differences of `f` with respect to every parameter,
/// flattened in `w1, b1, w2, b2` order.
pub fn fd_gradient(params: &PolicyParams<f64>, f: impl Fn(&PolicyParams<f64>) -> f64) -> Vec<f64> {
    let n = params.num_params();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut plus = params.clone();
        let mut minus = params.clone();
        *plus.values_mut().nth(i).unwrap() += FD_STEP;
        *minus.values_mut().nth(i).unwrap() -= FD_STEP;
        out.push((f(&plus) - f(&minus)) / (2.0 * FD_STEP));
    }
    out
}

pub fn flatten(grads: &PolicyGrads<f64>) -> Vec<f64> {
    grads.values().copied().collect()
}

/// `|a - b|_2 / max(|a|_2, |b|_2)`, with a floor on the denominator so
/// vanishing gradients compare absolutely.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-6)
}

pub fn random_policy<R: Rng>(rng: &mut R, activation: Activation) -> PolicyParams<f64> {
    let hidden = rng.random_range(1..=8);
    let mut p = PolicyParams::zeros(hidden, activation);
    for v in p.values_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    p
}

/// A policy whose hidden units all sit away from the ReLU kink on `s`.
pub fn kink_free(params: &PolicyParams<f64>, s: &[f64]) -> bool {
    params.activation == Activation::Tanh
        || s.iter()
            .all(|&x| (0..params.hidden).all(|j| (params.w1[j] * x + params.b1[j]).abs() > 1e-3))
}

/// An episode with arbitrary signal, actions, rewards and targets.
pub fn random_record<R: Rng>(rng: &mut R, len: usize, zero_rewards: bool) -> EpisodeRecord<f64> {
    let s: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
    let actions = (0..len).map(|_| Action::from_bit(rng.random::<bool>())).collect();
    let rewards = (0..len)
        .map(|_| if zero_rewards { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect();
    let targets = Some((0..len).map(|_| rng.random::<f64>()).collect());
    EpisodeRecord {
        signal: EpisodeSignal {
            env: EnvKind::Window,
            landmarks: Landmarks::Window { lo: 1, hi: len },
            s,
        },
        actions,
        rewards,
        probs: vec![0.5; len],
        targets,
    }
}

pub fn jerk_brute(p: &[f64]) -> f64 {
    let mut best = 0.0;
    for i in 1..p.len() {
        let d = if p[i] > p[i - 1] {
            p[i] - p[i - 1]
        } else {
            p[i - 1] - p[i]
        };
        if d > best {
            best = d;
        }
    }
    best
}

pub fn oscillations_brute(p: &[f64]) -> usize {
    let mut count = 0;
    for i in 1..p.len() {
        let was_high = p[i - 1] > 0.5;
        let is_high = p[i] > 0.5;
        if was_high != is_high {
            count += 1;
        }
    }
    count
}

pub fn decision_time_brute(p: &[f64], threshold: f64) -> Option<usize> {
    for t in 1..=p.len() {
        if p[t - 1] > threshold {
            return Some(t);
        }
    }
    None
}

/// A trace that often lands exactly on 0.5 and the decision threshold.
pub fn random_trace<R: Rng>(rng: &mut R) -> Vec<f64> {
    let len = rng.random_range(2..=120);
    let ties = [0.5, 0.6, 0.0, 1.0];
    (0..len)
        .map(|_| match rng.random_range(0..4) {
            0 => ties[rng.random_range(0..ties.len())],
            1 => (rng.random_range(0..=20) as f64) / 20.0,
            _ => rng.random::<f64>(),
        })
        .collect()
}
