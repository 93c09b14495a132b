//! Scalar-signal environments.
//!
//! Each environment emits an exogenous trace `s_1..s_T` in `[0, 1]`. The
//! trace never depends on the agent's actions, so the same generator serves
//! training episodes and frozen-policy evaluation. Rewards are per-step and
//! acting is repeatable; episodes always run to the horizon.
//!
//! Timesteps are 1-indexed throughout this module: `s_t` lives at
//! `signal.s[t - 1]`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Level every ramp ends at.
pub const PEAK_LEVEL: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    /// Noisy plateau followed by a slow upward drift from a random onset.
    Drift,
    /// Jitter around a threshold, then a sustained crossing.
    Hover,
    /// Steady rise; acting pays only inside a fixed window.
    Window,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Drift, EnvKind::Hover, EnvKind::Window];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Drift => "drift",
            EnvKind::Hover => "hover",
            EnvKind::Window => "window",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "drift" => Ok(EnvKind::Drift),
            "hover" | "threshold_hover" => Ok(EnvKind::Hover),
            "window" | "decision_window" => Ok(EnvKind::Window),
            other => Err(format!("unknown environment `{other}` (expected drift|hover|window)")),
        }
    }
}

/// Binary action. `Wait` is always free.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Wait,
    Act,
}

impl Action {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Action::Act
        } else {
            Action::Wait
        }
    }

    /// 1 for `Act`, 0 for `Wait`.
    pub fn indicator<T: Scalar>(self) -> T {
        match self {
            Action::Act => T::one(),
            Action::Wait => T::zero(),
        }
    }
}

/// Signal-generation and reward parameters shared by all three environments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub horizon: usize,

    pub drift_onset_lo: usize,
    pub drift_onset_hi: usize,
    pub drift_base: f64,
    /// Noise before the onset.
    pub drift_noise_sd: f64,
    /// Noise on the ramp.
    pub drift_ramp_noise_sd: f64,

    pub hover_threshold: f64,
    pub hover_jitter: f64,
    pub hover_cross_lo: usize,
    pub hover_cross_hi: usize,
    pub hover_ramp_len: usize,
    /// Noise around the peak once the ramp has finished.
    pub hover_settle_noise_sd: f64,

    pub window_lo: usize,
    pub window_hi: usize,
    pub window_noise_sd: f64,

    pub sustain_lag: usize,
    pub reward_hit: f64,
    pub reward_miss: f64,
    pub reward_transient: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            drift_onset_lo: 20,
            drift_onset_hi: 60,
            drift_base: 0.3,
            drift_noise_sd: 0.05,
            drift_ramp_noise_sd: 0.03,
            hover_threshold: 0.5,
            hover_jitter: 0.08,
            hover_cross_lo: 50,
            hover_cross_hi: 70,
            hover_ramp_len: 15,
            hover_settle_noise_sd: 0.02,
            window_lo: 60,
            window_hi: 80,
            window_noise_sd: 0.02,
            sustain_lag: 10,
            reward_hit: 1.0,
            reward_miss: -1.0,
            reward_transient: -0.2,
        }
    }
}

impl EnvConfig {
    /// Checks every invariant; the error names the first offending key.
    pub fn validate(&self) -> Result<()> {
        let t = self.horizon;
        if t < 2 {
            return Err(Error::config("env.horizon", format!("must be at least 2, got {t}")));
        }
        if !(self.drift_onset_lo < self.drift_onset_hi && self.drift_onset_hi < t) {
            return Err(Error::config(
                "env.drift_onset_hi",
                format!(
                    "need 0 <= drift_onset_lo < drift_onset_hi < horizon, got [{}, {}] with horizon {t}",
                    self.drift_onset_lo, self.drift_onset_hi
                ),
            ));
        }
        if !(self.hover_cross_lo >= 1 && self.hover_cross_lo <= self.hover_cross_hi && self.hover_cross_hi <= t) {
            return Err(Error::config(
                "env.hover_cross_hi",
                format!(
                    "need 1 <= hover_cross_lo <= hover_cross_hi <= horizon, got [{}, {}]",
                    self.hover_cross_lo, self.hover_cross_hi
                ),
            ));
        }
        if self.hover_ramp_len == 0 {
            return Err(Error::config("env.hover_ramp_len", "must be at least 1"));
        }
        if !(self.window_lo > 0 && self.window_lo < self.window_hi && self.window_hi <= t) {
            return Err(Error::config(
                "env.window_hi",
                format!(
                    "need 0 < window_lo < window_hi <= horizon, got [{}, {}]",
                    self.window_lo, self.window_hi
                ),
            ));
        }
        for (key, level) in [
            ("env.drift_base", self.drift_base),
            ("env.hover_threshold", self.hover_threshold),
        ] {
            if !(0.0..=1.0).contains(&level) {
                return Err(Error::config(key, format!("must lie in [0, 1], got {level}")));
            }
        }
        for (key, spread) in [
            ("env.drift_noise_sd", self.drift_noise_sd),
            ("env.drift_ramp_noise_sd", self.drift_ramp_noise_sd),
            ("env.hover_jitter", self.hover_jitter),
            ("env.hover_settle_noise_sd", self.hover_settle_noise_sd),
            ("env.window_noise_sd", self.window_noise_sd),
        ] {
            if !(spread.is_finite() && spread >= 0.0) {
                return Err(Error::config(key, format!("must be finite and >= 0, got {spread}")));
            }
        }
        for (key, r) in [
            ("env.reward_hit", self.reward_hit),
            ("env.reward_miss", self.reward_miss),
            ("env.reward_transient", self.reward_transient),
        ] {
            if !r.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        Ok(())
    }
}

/// Generative landmarks of one episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Landmarks {
    Drift { onset: usize },
    Hover { cross: usize },
    Window { lo: usize, hi: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSignal<T> {
    pub env: EnvKind,
    pub landmarks: Landmarks,
    pub s: Vec<T>,
}

impl<T: Scalar> EpisodeSignal<T> {
    pub fn horizon(&self) -> usize {
        self.s.len()
    }

    /// `s_t` for 1-indexed `t`.
    pub fn at(&self, t: usize) -> T {
        self.s[t - 1]
    }
}

#[inline]
fn clip01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn finish<T: Scalar>(env: EnvKind, landmarks: Landmarks, s: Vec<f64>) -> EpisodeSignal<T> {
    EpisodeSignal {
        env,
        landmarks,
        s: s.into_iter().map(T::lit).collect(),
    }
}

/// Draws one episode of the requested environment.
pub fn generate<T: Scalar, R: Rng + ?Sized>(kind: EnvKind, cfg: &EnvConfig, rng: &mut R) -> EpisodeSignal<T> {
    match kind {
        EnvKind::Drift => generate_drift(cfg, rng),
        EnvKind::Hover => generate_hover(cfg, rng),
        EnvKind::Window => generate_window(cfg, rng),
    }
}

pub fn generate_drift<T: Scalar, R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> EpisodeSignal<T> {
    let onset = rng.random_range(cfg.drift_onset_lo..=cfg.drift_onset_hi);
    drift_with_onset(cfg, onset, rng)
}

/// Drift episode with a fixed onset. The noiseless ramp is linear from
/// `drift_base` at `t = onset` to [`PEAK_LEVEL`] at `t = T`.
pub fn drift_with_onset<T: Scalar, R: Rng + ?Sized>(cfg: &EnvConfig, onset: usize, rng: &mut R) -> EpisodeSignal<T> {
    let horizon = cfg.horizon;
    let slope = if onset < horizon {
        (PEAK_LEVEL - cfg.drift_base) / (horizon - onset) as f64
    } else {
        0.0
    };
    let s = (1..=horizon)
        .map(|t| {
            let z: f64 = rng.sample(StandardNormal);
            if t < onset {
                clip01(cfg.drift_base + cfg.drift_noise_sd * z)
            } else {
                clip01(cfg.drift_base + slope * (t - onset) as f64 + cfg.drift_ramp_noise_sd * z)
            }
        })
        .collect();
    finish(EnvKind::Drift, Landmarks::Drift { onset }, s)
}

pub fn generate_hover<T: Scalar, R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> EpisodeSignal<T> {
    let cross = rng.random_range(cfg.hover_cross_lo..=cfg.hover_cross_hi);
    hover_with_cross(cfg, cross, rng)
}

/// Hover episode with a fixed crossing time.
pub fn hover_with_cross<T: Scalar, R: Rng + ?Sized>(cfg: &EnvConfig, cross: usize, rng: &mut R) -> EpisodeSignal<T> {
    let thr = cfg.hover_threshold;
    let ramp = cfg.hover_ramp_len;
    let s = (1..=cfg.horizon)
        .map(|t| {
            // one uniform and one normal per step regardless of phase
            let u: f64 = rng.random();
            let z: f64 = rng.sample(StandardNormal);
            if t < cross {
                clip01(thr + cfg.hover_jitter * (2.0 * u - 1.0))
            } else if t < cross + ramp {
                clip01(thr + (PEAK_LEVEL - thr) * (t - cross) as f64 / ramp as f64)
            } else {
                clip01(PEAK_LEVEL + cfg.hover_settle_noise_sd * z)
            }
        })
        .collect();
    finish(EnvKind::Hover, Landmarks::Hover { cross }, s)
}

/// Window episode: a noisy linear rise from 0.1 at `t = 1` to
/// [`PEAK_LEVEL`] at `t = T`.
pub fn generate_window<T: Scalar, R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> EpisodeSignal<T> {
    let horizon = cfg.horizon;
    let span = (horizon.max(2) - 1) as f64;
    let s = (1..=horizon)
        .map(|t| {
            let z: f64 = rng.sample(StandardNormal);
            let trend = 0.1 + (PEAK_LEVEL - 0.1) * (t - 1) as f64 / span;
            clip01(trend + cfg.window_noise_sd * z)
        })
        .collect();
    finish(
        EnvKind::Window,
        Landmarks::Window {
            lo: cfg.window_lo,
            hi: cfg.window_hi,
        },
        s,
    )
}

/// Per-step reward for taking `action` at 1-indexed step `t`.
pub fn reward<T: Scalar>(signal: &EpisodeSignal<T>, t: usize, action: Action, cfg: &EnvConfig) -> Result<T> {
    let horizon = signal.horizon();
    if t == 0 || t > horizon {
        return Err(Error::contract(format!("timestep {t} outside [1, {horizon}]")));
    }
    if action == Action::Wait {
        return Ok(T::zero());
    }
    let lagged = |start: usize| {
        if t < start {
            cfg.reward_miss
        } else if t < start + cfg.sustain_lag {
            cfg.reward_transient
        } else {
            cfg.reward_hit
        }
    };
    let r = match signal.landmarks {
        Landmarks::Drift { onset } => lagged(onset),
        Landmarks::Hover { cross } => lagged(cross),
        Landmarks::Window { lo, hi } => {
            if (lo..=hi).contains(&t) {
                cfg.reward_hit
            } else {
                cfg.reward_miss
            }
        }
    };
    Ok(T::lit(r))
}
