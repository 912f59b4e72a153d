use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use super::Scheme;
use crate::diagnostics::batch_means;
use crate::error::{finite, Error, Result};
use crate::quantizers::BinaryQuantizer;
use crate::sources::{validate_spec, SourceKind, SourceSpec, SourceStream, DEFAULT_BURN_IN};

/// Delta-modulation tracker `S_{k+1} = S_k + Q(X_k - S_k)` with a one-bit
/// quantizer of magnitude `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaMod {
    quantizer: BinaryQuantizer,
}

/// Tracker level `s = origin + steps * m`. The integer `steps` is exact; `s`
/// is recomputed from it rather than accumulated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaModState {
    origin: f64,
    steps: i64,
    s: f64,
}

impl DeltaModState {
    pub fn new(origin: f64) -> Self {
        DeltaModState {
            origin,
            steps: 0,
            s: origin,
        }
    }

    pub fn level(&self) -> f64 {
        self.s
    }

    /// Signed number of `+m` moves minus `-m` moves since the origin.
    pub fn steps(&self) -> i64 {
        self.steps
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }
}

pub fn delta_mod_step(state: &DeltaModState, x: f64, q: &BinaryQuantizer) -> Result<DeltaModState> {
    let x = finite(x)?;
    let dir = if q.quantize(x - state.s)? > 0.0 { 1 } else { -1 };
    let steps = state.steps + dir;
    Ok(DeltaModState {
        origin: state.origin,
        steps,
        s: state.origin + steps as f64 * q.half_step(),
    })
}

impl DeltaMod {
    pub fn new(m: f64) -> Result<Self> {
        Ok(DeltaMod {
            quantizer: BinaryQuantizer::new(m)?,
        })
    }

    pub fn m(&self) -> f64 {
        self.quantizer.half_step()
    }
}

impl Scheme for DeltaMod {
    type State = DeltaModState;

    fn init(&self, s0: f64) -> Result<DeltaModState> {
        Ok(DeltaModState::new(finite(s0)?))
    }

    #[inline]
    fn step(&self, state: &DeltaModState, x: f64) -> Result<DeltaModState> {
        delta_mod_step(state, x, &self.quantizer)
    }

    fn observe(&self, state: &DeltaModState) -> f64 {
        state.s
    }
}

/// Estimate of one tail probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailEstimate {
    pub monte_carlo: f64,
    /// 95% half-width from batch means over the sample path.
    pub half_width: f64,
    /// Closed form from the stationary Gaussian law, when available.
    pub analytic: Option<f64>,
}

impl TailEstimate {
    pub fn best(&self) -> f64 {
        self.analytic.unwrap_or(self.monte_carlo)
    }
}

/// Outcome of checking `P(X ≥ m) < 1/2` and `P(X ≤ -m) < 1/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityPrecheck {
    pub m: f64,
    pub upper: TailEstimate,
    pub lower: TailEstimate,
    pub passes: bool,
}

pub const MIN_PRECHECK_SAMPLES: usize = 10_000;

pub fn check_delta_mod_stability(source: &SourceSpec, m: f64, n_samples: usize) -> Result<StabilityPrecheck> {
    let spec = validate_spec(source.clone())?;
    BinaryQuantizer::new(m)?;
    if n_samples < MIN_PRECHECK_SAMPLES {
        return Err(Error::invalid(
            "n_samples",
            format!("need at least {MIN_PRECHECK_SAMPLES}, got {n_samples}"),
        ));
    }

    let mut upper_hits = Vec::with_capacity(n_samples);
    let mut lower_hits = Vec::with_capacity(n_samples);
    for x in SourceStream::new(&spec, DEFAULT_BURN_IN).take(n_samples) {
        upper_hits.push(if x >= m { 1.0 } else { 0.0 });
        lower_hits.push(if x <= -m { 1.0 } else { 0.0 });
    }

    let law = stationary_std(source).map(|std| Normal::new(source.mean_shift, std).expect("positive std"));
    let tail = |hits: &[f64], analytic: Option<f64>| {
        let est = batch_means(hits, crate::diagnostics::DEFAULT_BATCHES);
        TailEstimate {
            monte_carlo: est.mean,
            half_width: 1.96 * est.stderr,
            analytic,
        }
    };
    let upper = tail(&upper_hits, law.as_ref().map(|n| n.sf(m)));
    let lower = tail(&lower_hits, law.as_ref().map(|n| n.cdf(-m)));
    Ok(StabilityPrecheck {
        m,
        upper,
        lower,
        passes: upper.best() < 0.5 && lower.best() < 0.5,
    })
}

/// Standard deviation of the stationary Gaussian marginal.
pub(crate) fn stationary_std(source: &SourceSpec) -> Option<f64> {
    let var_w = source.noise_std * source.noise_std;
    match source.kind {
        SourceKind::Iid => Some(source.noise_std),
        SourceKind::Ma => Some((var_w * source.coefficients.iter().map(|a| a * a).sum::<f64>()).sqrt()),
        SourceKind::Ar => ar_stationary_variance(&source.coefficients, var_w).map(f64::sqrt),
    }
}

/// Solves `P = A P A^T + Q` for the companion form of an AR(N) recursion and
/// returns `P[0][0]`.
fn ar_stationary_variance(coefficients: &[f64], var_w: f64) -> Option<f64> {
    let n = coefficients.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            coefficients[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let system = DMatrix::identity(n * n, n * n) - a.kronecker(&a);
    let mut q = DMatrix::zeros(n * n, 1);
    q[(0, 0)] = var_w;
    let p = system.lu().solve(&q)?;
    let var = p[(0, 0)];
    (var > 0.0 && var.is_finite()).then_some(var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::ScriptedNoise;

    #[test]
    fn one_step_moves_by_m() {
        let q = BinaryQuantizer::new(1.0).unwrap();
        let s = DeltaModState::new(0.0);
        assert_eq!(delta_mod_step(&s, 0.4, &q).unwrap().level(), 1.0);
        assert_eq!(delta_mod_step(&s, -0.4, &q).unwrap().level(), -1.0);
        assert_eq!(delta_mod_step(&s, 0.0, &q).unwrap().level(), 1.0);
        assert!(delta_mod_step(&s, f64::NAN, &q).is_err());
    }

    #[test]
    fn path_is_lipschitz_and_on_lattice() {
        let scheme = DeltaMod::new(0.25).unwrap();
        let spec = validate_spec(SourceSpec::ar(vec![0.7], 2.0, 9)).unwrap();
        let mut state = scheme.init(0.5).unwrap();
        for (k, x) in SourceStream::new(&spec, 100).take(5_000).enumerate() {
            let next = scheme.step(&state, x).unwrap();
            assert_eq!((next.level() - state.level()).abs(), 0.25);
            assert!((next.level() - 0.5).abs() <= (k + 1) as f64 * 0.25);
            assert_eq!(next.level(), 0.5 + next.steps() as f64 * 0.25);
            state = next;
        }
    }

    #[test]
    fn tracks_a_noise_free_ar_source() {
        let scheme = DeltaMod::new(1.0).unwrap();
        let spec = validate_spec(SourceSpec::ar(vec![0.5], 1.0, 0)).unwrap();
        let mut stream = SourceStream::with_noise(&spec, ScriptedNoise::zeros()).with_history(&[8.0]);
        let mut state = scheme.init(0.0).unwrap();
        for _ in 0..20 {
            state = scheme.step(&state, stream.next_sample()).unwrap();
        }
        assert!(state.level().abs() <= 1.0);
    }

    fn normal_sf(z: f64) -> f64 {
        // Composite Simpson on the density over [z, z + 12].
        let n = 20_000;
        let h = 12.0 / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = pdf(z) + pdf(z + 12.0);
        for i in 1..n {
            acc += pdf(z + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn precheck_standard_normal_passes() {
        let out = check_delta_mod_stability(&SourceSpec::iid(1.0, 3), 1.0, 100_000).unwrap();
        let oracle = normal_sf(1.0);
        assert!((oracle - 0.158_655).abs() < 1e-5);
        assert!((out.upper.analytic.unwrap() - oracle).abs() < 1e-9);
        assert!((out.lower.analytic.unwrap() - oracle).abs() < 1e-9);
        assert!((out.upper.monte_carlo - oracle).abs() < 3.0 * out.upper.half_width);
        assert!(out.passes);
    }

    #[test]
    fn precheck_shifted_normal_fails() {
        let source = SourceSpec::iid(1.0, 3).with_mean_shift(2.0);
        let out = check_delta_mod_stability(&source, 1.0, 20_000).unwrap();
        let oracle = normal_sf(-1.0);
        assert!((oracle - 0.841_345).abs() < 1e-5);
        assert!((out.upper.analytic.unwrap() - oracle).abs() < 1e-9);
        assert!(!out.passes);
    }

    #[test]
    fn precheck_tails_vanish_for_large_m() {
        let mut last = f64::INFINITY;
        for m in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let out = check_delta_mod_stability(&SourceSpec::iid(1.0, 1), m, 10_000).unwrap();
            assert!(out.passes);
            assert!(out.upper.best() < last);
            last = out.upper.best();
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn precheck_needs_enough_samples() {
        assert!(check_delta_mod_stability(&SourceSpec::iid(1.0, 1), 1.0, 10).is_err());
    }

    #[test]
    fn ar_stationary_variance_matches_closed_forms() {
        // AR(1): sigma^2 / (1 - a^2).
        let v = ar_stationary_variance(&[0.5], 1.0).unwrap();
        assert!((v - 1.0 / 0.75).abs() < 1e-12);
        // AR(2): (1 - a2) / ((1 + a2) ((1 - a2)^2 - a1^2)).
        let (a1, a2) = (0.5, 0.2);
        let closed = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) * (1.0 - a2) - a1 * a1));
        assert!((ar_stationary_variance(&[a1, a2], 1.0).unwrap() - closed).abs() < 1e-12);
    }
}
