//! Second-order hysteretic filter producing the auxiliary regression target.
//!
//! The level `z` moves toward the observation with an asymmetric rate
//! (`alpha_up` when the observation is at or above `z`, `alpha_down` below)
//! plus a velocity term `v` that smooths successive level changes. The level
//! update reads the previous velocity; the velocity is then refreshed from the
//! new level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsdParams<T> {
    pub alpha_up: T,
    pub alpha_down: T,
    pub beta: T,
    /// Clamp the level to `[0, 1]` before the velocity update.
    pub clamp_output: bool,
}

impl<T: Scalar> Default for EsdParams<T> {
    fn default() -> Self {
        Self {
            alpha_up: T::lit(0.15),
            alpha_down: T::lit(0.4),
            beta: T::lit(0.6),
            clamp_output: true,
        }
    }
}

impl<T: Scalar> EsdParams<T> {
    pub fn validate(&self) -> Result<()> {
        let unit_rate = |x: T| x > T::zero() && x <= T::one();
        if !unit_rate(self.alpha_up) {
            return Err(Error::config(
                "esd.alpha_up",
                format!("must lie in (0, 1], got {}", self.alpha_up),
            ));
        }
        if !unit_rate(self.alpha_down) {
            return Err(Error::config(
                "esd.alpha_down",
                format!("must lie in (0, 1], got {}", self.alpha_down),
            ));
        }
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return Err(Error::config(
                "esd.beta",
                format!("must lie in [0, 1], got {}", self.beta),
            ));
        }
        Ok(())
    }

    /// Rate used when moving from `z_prev` toward observation `s`.
    #[inline]
    pub fn rate(&self, s: T, z_prev: T) -> T {
        if s < z_prev {
            self.alpha_down
        } else {
            self.alpha_up
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsdState<T> {
    pub z: T,
    pub v: T,
}

fn check_unit<T: Scalar>(s: T, what: &str) -> Result<()> {
    if s >= T::zero() && s <= T::one() {
        Ok(())
    } else {
        Err(Error::contract(format!("{what} must lie in [0, 1], got {s}")))
    }
}

impl<T: Scalar> EsdState<T> {
    /// Rest state at the first observation.
    pub fn init(s0: T) -> Result<Self> {
        check_unit(s0, "initial observation")?;
        Ok(Self { z: s0, v: T::zero() })
    }

    /// Advances by one observation without checking its range.
    #[inline]
    pub fn advance(self, s: T, params: &EsdParams<T>) -> Self {
        let alpha = params.rate(s, self.z);
        let mut z = self.z + alpha * (s - self.z) + self.v;
        if params.clamp_output {
            z = z.max(T::zero()).min(T::one());
        }
        let v = params.beta * (z - self.z) + (T::one() - params.beta) * self.v;
        Self { z, v }
    }

    pub fn step(self, s: T, params: &EsdParams<T>) -> Result<Self> {
        check_unit(s, "observation")?;
        Ok(self.advance(s, params))
    }
}

/// Filters a whole signal, returning `z_1..z_T`.
///
/// The state starts at rest on `s_1` and is then stepped through every
/// observation including the first, so a constant signal is reproduced
/// exactly.
pub fn trajectory<T: Scalar>(signal: &[T], params: &EsdParams<T>) -> Result<Vec<T>> {
    let first = *signal
        .first()
        .ok_or_else(|| Error::contract("cannot filter an empty signal"))?;
    let mut state = EsdState::init(first)?;
    signal
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            check_unit(s, &format!("observation {}", i + 1))?;
            state = state.advance(s, params);
            Ok(state.z)
        })
        .collect()
}
