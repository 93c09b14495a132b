//! Policy-gradient agents with a dynamical-prior auxiliary objective.
//!
//! A plain REINFORCE agent and a prior-regularised agent share one MLP policy
//! and are trained on three scalar-signal environments. The prior is a
//! hysteretic second-order filter of the observation; its output is a
//! regression target for the action probability. Trained policies are frozen
//! and replayed to measure jerk, oscillation count and decision-timing spread.
//!
//! The numeric code is generic over [`Scalar`] (`f32`/`f64`). The aliases
//! below fix it to `f64`, which is what experiments use.

pub mod config;
pub mod env;
pub mod error;
pub mod esd;
pub mod experiment;
pub mod metrics;
pub mod optim;
pub mod policy;
pub mod scalar;
pub mod streams;
pub mod trainer;

pub use config::ExperimentConfig;
pub use env::{Action, EnvConfig, EnvKind, Landmarks};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use trainer::{AgentKind, TrainConfig};

pub type EpisodeSignal = env::EpisodeSignal<f64>;
pub type EsdParams = esd::EsdParams<f64>;
pub type EsdState = esd::EsdState<f64>;
pub type PolicyParams = policy::PolicyParams<f64>;
pub type PolicyGrads = policy::PolicyGrads<f64>;
pub type RolloutTrace = metrics::RolloutTrace<f64>;
pub type MetricSummary = metrics::MetricSummary<f64>;
pub type Trainer = trainer::Trainer<f64>;
pub type TrainOutcome = trainer::TrainOutcome<f64>;
pub type EpisodeRecord = trainer::EpisodeRecord<f64>;
