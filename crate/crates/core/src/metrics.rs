//! Frozen-policy rollouts and temporal-geometry metrics.
//!
//! Evaluation replays fresh signals through a frozen policy and records the
//! action probability at every step. No actions are sampled and no rewards
//! are computed. Per-trace metrics are then averaged across rollouts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{self, EnvConfig, EnvKind, Landmarks};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::scalar::Scalar;

/// Default confidence threshold for the decision time.
pub const DECISION_THRESHOLD: f64 = 0.6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutTrace<T> {
    pub p: Vec<T>,
    pub landmarks: Landmarks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary<T> {
    pub mean_jerk: T,
    pub mean_oscillations: T,
    /// Population variance of the defined decision times.
    pub timing_variance: T,
    pub timing_std: T,
    pub n_rollouts: usize,
    pub n_committed: usize,
    /// Fewer than two rollouts ever crossed the threshold.
    pub non_committal: bool,
    pub mean_curve: Vec<T>,
    pub std_curve: Vec<T>,
}

/// Records `p_t` along `n` freshly generated signals.
pub fn collect_rollouts<T: Scalar, R: Rng + ?Sized>(
    policy: &PolicyParams<T>,
    env_kind: EnvKind,
    cfg: &EnvConfig,
    n: usize,
    rng: &mut R,
) -> Result<Vec<RolloutTrace<T>>> {
    if n == 0 {
        return Err(Error::contract("need at least one rollout"));
    }
    Ok((0..n)
        .map(|_| {
            let signal = env::generate::<T, _>(env_kind, cfg, rng);
            RolloutTrace {
                p: signal.s.iter().map(|&s| policy.prob(s)).collect(),
                landmarks: signal.landmarks,
            }
        })
        .collect())
}

fn check_len<T>(p: &[T]) -> Result<()> {
    if p.len() < 2 {
        Err(Error::contract(format!(
            "trace needs at least 2 steps, got {}",
            p.len()
        )))
    } else {
        Ok(())
    }
}

/// Largest absolute one-step change in probability.
pub fn jerk<T: Scalar>(p: &[T]) -> Result<T> {
    check_len(p)?;
    Ok(p.windows(2).map(|w| (w[1] - w[0]).abs()).fold(T::zero(), T::max))
}

/// Number of steps where the trace changes side of 0.5. Exactly 0.5 counts
/// as the lower side.
pub fn oscillation_count<T: Scalar>(p: &[T]) -> Result<usize> {
    check_len(p)?;
    let half = T::lit(0.5);
    Ok(p.windows(2).filter(|w| (w[0] > half) != (w[1] > half)).count())
}

/// First 1-indexed step where `p_t > threshold`, if any.
pub fn decision_time<T: Scalar>(p: &[T], threshold: T) -> Option<usize> {
    p.iter().position(|&x| x > threshold).map(|i| i + 1)
}

pub fn aggregate<T: Scalar>(traces: &[RolloutTrace<T>], threshold: T) -> Result<MetricSummary<T>> {
    let first = traces
        .first()
        .ok_or_else(|| Error::contract("cannot aggregate zero traces"))?;
    let horizon = first.p.len();
    if traces.iter().any(|tr| tr.p.len() != horizon) {
        return Err(Error::contract("traces have different lengths"));
    }
    let n = T::from_usize_exact(traces.len());

    let mut jerk_sum = T::zero();
    let mut osc_sum = T::zero();
    let mut times = Vec::new();
    for tr in traces {
        jerk_sum = jerk_sum + jerk(&tr.p)?;
        osc_sum = osc_sum + T::from_usize_exact(oscillation_count(&tr.p)?);
        if let Some(t) = decision_time(&tr.p, threshold) {
            times.push(T::from_usize_exact(t));
        }
    }

    let n_committed = times.len();
    let non_committal = n_committed < 2;
    let timing_variance = if non_committal {
        T::zero()
    } else {
        let k = T::from_usize_exact(n_committed);
        let mean = times.iter().copied().sum::<T>() / k;
        times.iter().map(|&t| (t - mean) * (t - mean)).sum::<T>() / k
    };

    let mut mean_curve = vec![T::zero(); horizon];
    let mut std_curve = vec![T::zero(); horizon];
    for t in 0..horizon {
        let mean = traces.iter().map(|tr| tr.p[t]).sum::<T>() / n;
        let var = traces.iter().map(|tr| (tr.p[t] - mean) * (tr.p[t] - mean)).sum::<T>() / n;
        mean_curve[t] = mean;
        std_curve[t] = var.sqrt();
    }

    Ok(MetricSummary {
        mean_jerk: jerk_sum / n,
        mean_oscillations: osc_sum / n,
        timing_variance,
        timing_std: timing_variance.sqrt(),
        n_rollouts: traces.len(),
        n_committed,
        non_committal,
        mean_curve,
        std_curve,
    })
}
