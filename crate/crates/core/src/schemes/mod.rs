//! Adaptive update rules `S_{k+1} = F(X_k, S_k)`.
//!
//! Each scheme exposes a typed state and a pure step function. The
//! [`Scheme`] trait erases the differences so the diagnostics can drive any
//! of them from a [`SourceStream`](crate::sources::SourceStream).

mod delta_mod;
mod goodman_gersho;
pub mod lattice;
mod zoom;

pub use delta_mod::{
    check_delta_mod_stability, delta_mod_step, DeltaMod, DeltaModState, StabilityPrecheck, MIN_PRECHECK_SAMPLES,
    TailEstimate,
};
pub use goodman_gersho::{gg_step, GGPolicy, GGState, GoodmanGersho};
pub use lattice::{lattice_reachability, steps_gcd, LogSpacing, StepLattice};
pub use zoom::{
    required_rate, required_rate_with_epsilon, zoom_step, DEFAULT_RATE_EPSILON, RateRequirement, ZoomParams, ZoomRounding, ZoomState, ZoomStep};

use crate::error::{finite, Result};

/// A time-invariant update rule driven by an exogenous scalar input.
pub trait Scheme: Send + Sync {
    type State: Clone + Send;

    /// State with observable value `s0`.
    fn init(&self, s0: f64) -> Result<Self::State>;

    fn step(&self, state: &Self::State, x: f64) -> Result<Self::State>;

    /// Scalar coordinate of the state seen by the diagnostics.
    fn observe(&self, state: &Self::State) -> f64;
}

/// `s' = gain * s + input_gain * x + offset`.
///
/// Covers the reference systems used to sanity check the diagnostics: a
/// contraction (`gain < 1`), an absorbing chain (`gain = 1, input_gain = 0`)
/// and a random walk (`gain = 1, input_gain = 1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearScheme {
    pub gain: f64,
    pub input_gain: f64,
    pub offset: f64,
}

impl LinearScheme {
    pub fn contraction(gain: f64) -> Self {
        LinearScheme {
            gain,
            input_gain: 0.0,
            offset: 0.0,
        }
    }

    pub fn absorbing() -> Self {
        LinearScheme::contraction(1.0)
    }

    pub fn random_walk() -> Self {
        LinearScheme {
            gain: 1.0,
            input_gain: 1.0,
            offset: 0.0,
        }
    }
}

impl Scheme for LinearScheme {
    type State = f64;

    fn init(&self, s0: f64) -> Result<f64> {
        finite(s0)
    }

    fn step(&self, s: &f64, x: f64) -> Result<f64> {
        let x = finite(x)?;
        Ok(self.gain * s + self.input_gain * x + self.offset)
    }

    fn observe(&self, s: &f64) -> f64 {
        *s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_reference_systems() {
        let c = LinearScheme::contraction(0.5);
        assert_eq!(c.step(&8.0, 123.0).unwrap(), 4.0);
        let a = LinearScheme::absorbing();
        assert_eq!(a.step(&1.0, -3.0).unwrap(), 1.0);
        let w = LinearScheme::random_walk();
        assert_eq!(w.step(&1.0, 2.0).unwrap(), 3.0);
        assert!(w.step(&1.0, f64::NAN).is_err());
    }
}
