use super::lattice::{steps_gcd, StepLattice};
use super::Scheme;
use crate::error::{finite, Error, Result};
use crate::quantizers::{Quantized, UniformQuantizer};

/// Staircase step-size multiplier `Q_2`.
///
/// Cell `i` holds the normalized magnitudes `r` with
/// `thresholds[i-1] < r <= thresholds[i]` (open-ended at both extremes) and
/// multiplies the step size by `2^(log_steps[i] * spacing)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GGPolicy {
    thresholds: Vec<f64>,
    log_steps: Vec<i64>,
    coprime: bool,
}

impl GGPolicy {
    /// Validates monotonicity and the limit conditions. With
    /// `require_coprime`, nonzero steps must have gcd 1.
    pub fn new(thresholds: Vec<f64>, log_steps: Vec<i64>, require_coprime: bool) -> Result<Self> {
        if log_steps.len() != thresholds.len() + 1 {
            return Err(Error::invalid(
                "log_steps",
                format!(
                    "need one step per cell ({} thresholds -> {} cells), got {}",
                    thresholds.len(),
                    thresholds.len() + 1,
                    log_steps.len()
                ),
            ));
        }
        if thresholds.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid("thresholds", "must be finite and nonnegative"));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("thresholds", "must be strictly ascending"));
        }
        if log_steps.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("log_steps", "Q_2 must be nondecreasing"));
        }
        if log_steps[0] >= 0 {
            return Err(Error::invalid("log_steps", "first step must shrink the bin (Q_2(0) < 1)"));
        }
        if *log_steps.last().expect("nonempty") <= 0 {
            return Err(Error::invalid("log_steps", "last step must grow the bin (limit > 1)"));
        }
        let g = steps_gcd(&log_steps);
        if require_coprime && g != 1 {
            return Err(Error::invalid(
                "log_steps",
                format!("steps share the common divisor {g}; reachable sizes form a sublattice"),
            ));
        }
        Ok(GGPolicy {
            thresholds,
            log_steps,
            coprime: g == 1,
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn log_steps(&self) -> &[i64] {
        &self.log_steps
    }

    pub fn is_coprime(&self) -> bool {
        self.coprime
    }

    pub fn steps_gcd(&self) -> i64 {
        steps_gcd(&self.log_steps)
    }

    /// Lattice step taken for normalized magnitude `r`.
    #[inline]
    pub fn step_for(&self, r: f64) -> i64 {
        self.log_steps[self.thresholds.partition_point(|&t| t < r)]
    }
}

/// Step size held as an exact lattice index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GGState {
    pub log_index: i64,
    pub lattice: StepLattice,
}

impl GGState {
    pub fn delta(&self) -> f64 {
        self.lattice.delta(self.log_index)
    }

    pub fn log2_delta(&self) -> f64 {
        self.lattice.log2_delta(self.log_index)
    }
}

pub fn gg_step(state: &GGState, policy: &GGPolicy, x: f64) -> Result<GGState> {
    let x = finite(x)?;
    let r = x.abs() / state.delta();
    Ok(GGState {
        log_index: state.log_index + policy.step_for(r),
        lattice: state.lattice,
    })
}

/// Goodman–Gersho adaptive quantizer: output `V_t = Δ_t Q_1(X_t / Δ_t)` with
/// a `K`-level uniform `Q_1`, and `Δ_{t+1} = Δ_t Q_2(|X_t| / Δ_t)`.
///
/// The observed state is `log2 Δ_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GoodmanGersho {
    policy: GGPolicy,
    lattice: StepLattice,
    output_levels: u32,
}

impl GoodmanGersho {
    pub fn new(policy: GGPolicy, lattice: StepLattice, output_levels: u32) -> Result<Self> {
        UniformQuantizer::new(output_levels, 1.0)?;
        Ok(GoodmanGersho {
            policy,
            lattice,
            output_levels,
        })
    }

    pub fn policy(&self) -> &GGPolicy {
        &self.policy
    }

    pub fn lattice(&self) -> StepLattice {
        self.lattice
    }

    pub fn state_at(&self, log_index: i64) -> GGState {
        GGState {
            log_index,
            lattice: self.lattice,
        }
    }

    /// Tracked output `V_t` for input `x` at the current step size.
    pub fn reconstruct(&self, state: &GGState, x: f64) -> Result<Quantized> {
        let q = UniformQuantizer::new(self.output_levels, 1.0)?;
        let unit = q.quantize(x / state.delta())?;
        Ok(Quantized {
            value: unit.value * state.delta(),
            overflow: unit.overflow,
        })
    }
}

impl Scheme for GoodmanGersho {
    type State = GGState;

    /// `s0` is `log2 Δ_0`; it must sit on the lattice.
    fn init(&self, s0: f64) -> Result<GGState> {
        let offset = (finite(s0)? - self.lattice.log2_base()) / self.lattice.spacing().value();
        let index = offset.round();
        if (offset - index).abs() > 1e-9 {
            return Err(Error::invalid(
                "initial",
                format!("log2 step size {s0} is not on the lattice"),
            ));
        }
        Ok(self.state_at(index as i64))
    }

    #[inline]
    fn step(&self, state: &GGState, x: f64) -> Result<GGState> {
        gg_step(state, &self.policy, x)
    }

    fn observe(&self, state: &GGState) -> f64 {
        state.log2_delta()
    }
}

#[cfg(test)]
mod tests {
    use super::super::lattice::LogSpacing;
    use super::*;
    use crate::sources::{validate_spec, SourceSpec, SourceStream};

    fn unit_lattice() -> StepLattice {
        StepLattice::new(0.0, LogSpacing::ONE).unwrap()
    }

    fn half_or_four() -> GGPolicy {
        GGPolicy::new(vec![1.0], vec![-1, 2], true).unwrap()
    }

    #[test]
    fn staircase_cases() {
        let state = GGState {
            log_index: 0,
            lattice: unit_lattice(),
        };
        let small = gg_step(&state, &half_or_four(), 0.5).unwrap();
        assert_eq!((small.log_index, small.delta()), (-1, 0.5));
        let large = gg_step(&state, &half_or_four(), 3.0).unwrap();
        assert_eq!((large.log_index, large.delta()), (2, 4.0));
        // r = 1 belongs to the lower cell.
        assert_eq!(gg_step(&state, &half_or_four(), -1.0).unwrap().log_index, -1);
    }

    #[test]
    fn policy_validation() {
        assert!(GGPolicy::new(vec![1.0], vec![-1], false).is_err());
        assert!(GGPolicy::new(vec![1.0], vec![1, 2], false).is_err());
        assert!(GGPolicy::new(vec![1.0], vec![-1, 0], false).is_err());
        assert!(GGPolicy::new(vec![1.0, 2.0], vec![-1, 3, 2], false).is_err());
        assert!(GGPolicy::new(vec![2.0, 1.0], vec![-1, 0, 2], false).is_err());
        assert!(GGPolicy::new(vec![-1.0], vec![-1, 2], false).is_err());

        let even = GGPolicy::new(vec![1.0], vec![-2, 2], false).unwrap();
        assert!(!even.is_coprime());
        assert_eq!(even.steps_gcd(), 2);
        assert!(GGPolicy::new(vec![1.0], vec![-2, 2], true).is_err());
    }

    #[test]
    fn index_matches_integer_recurrence_and_float_product() {
        let lattice = StepLattice::new(0.1, LogSpacing::new(1, 3).unwrap()).unwrap();
        let policy = GGPolicy::new(vec![0.5, 1.5], vec![-1, 1, 2], true).unwrap();
        let scheme = GoodmanGersho::new(policy.clone(), lattice, 4).unwrap();
        let spec = validate_spec(SourceSpec::ar(vec![0.8], 1.0, 5)).unwrap();

        let mut state = scheme.init(0.1).unwrap();
        let mut index = 0i64;
        let mut product = state.delta();
        for (t, x) in SourceStream::new(&spec, 0).take(2_000).enumerate() {
            let r = x.abs() / state.delta();
            let step = policy.step_for(r);
            index += step;
            product *= lattice.factor(step);
            state = scheme.step(&state, x).unwrap();
            assert_eq!(state.log_index, index);
            let ulps = ((state.delta() - product) / state.delta()).abs() / f64::EPSILON;
            assert!(ulps <= (t + 2) as f64, "t={t} drift {ulps} ulp");
        }
    }

    #[test]
    fn init_requires_lattice_point() {
        let scheme = GoodmanGersho::new(half_or_four(), unit_lattice(), 4).unwrap();
        assert_eq!(scheme.init(3.0).unwrap().log_index, 3);
        assert!(scheme.init(0.5).is_err());
    }

    #[test]
    fn reconstruction_scales_with_step() {
        let scheme = GoodmanGersho::new(half_or_four(), unit_lattice(), 4).unwrap();
        let state = scheme.state_at(1);
        let out = scheme.reconstruct(&state, 0.3).unwrap();
        assert_eq!(out.value, 1.0);
        assert!(scheme.reconstruct(&state, 100.0).unwrap().overflow);
    }
}
