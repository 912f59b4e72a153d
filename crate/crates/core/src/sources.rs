//! Stationary scalar sources: i.i.d., autoregressive and truncated moving-average
//! Gaussian processes with reproducible seeding.
//!
//! A source is described by a [`SourceSpec`], checked once by
//! [`validate_spec`], and then sampled through a [`SourceStream`]. The infinite
//! past that drives the adaptive schemes is represented by a finite lag buffer:
//! `N` past values for AR(N), `L` past noises for an MA with `L + 1`
//! coefficients. Both are exact sufficient statistics for these processes.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of discarded samples before a stream is handed out.
pub const DEFAULT_BURN_IN: usize = 10_000;

/// AR stability margin on the companion-matrix spectral radius.
pub const AR_STABILITY_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Iid,
    Ar,
    Ma,
}

/// Description of a stationary scalar source.
///
/// * `Iid`: `X_t = W_t`. `coefficients` is ignored.
/// * `Ar`: `X_{t+1} = sum_{i<N} a_i X_{t-i} + W_t` with `coefficients = [a_0, .., a_{N-1}]`.
/// * `Ma`: `X_{t+1} = sum_{i<=L} a_i W_{t-i}` with `coefficients = [a_0, .., a_L]`.
///
/// `W_t` is i.i.d. `N(0, noise_std^2)`; `mean_shift` is added to every emitted sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: SourceKind,
    #[serde(default)]
    pub coefficients: Vec<f64>,
    pub noise_std: f64,
    #[serde(default)]
    pub mean_shift: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SourceSpec {
    pub fn iid(noise_std: f64, seed: u64) -> Self {
        SourceSpec {
            kind: SourceKind::Iid,
            coefficients: Vec::new(),
            noise_std,
            mean_shift: 0.0,
            seed,
        }
    }

    pub fn ar(coefficients: Vec<f64>, noise_std: f64, seed: u64) -> Self {
        SourceSpec {
            kind: SourceKind::Ar,
            coefficients,
            noise_std,
            mean_shift: 0.0,
            seed,
        }
    }

    pub fn ma(coefficients: Vec<f64>, noise_std: f64, seed: u64) -> Self {
        SourceSpec {
            kind: SourceKind::Ma,
            coefficients,
            noise_std,
            mean_shift: 0.0,
            seed,
        }
    }

    pub fn with_mean_shift(mut self, mean_shift: f64) -> Self {
        self.mean_shift = mean_shift;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A [`SourceSpec`] that passed [`validate_spec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedSpec(SourceSpec);

impl ValidatedSpec {
    pub fn spec(&self) -> &SourceSpec {
        &self.0
    }

    /// Same validated source with a different seed.
    pub fn reseeded(&self, seed: u64) -> ValidatedSpec {
        ValidatedSpec(self.0.clone().with_seed(seed))
    }
}

/// Spectral radius of the companion matrix of `z^N - a_0 z^{N-1} - .. - a_{N-1}`.
pub fn ar_spectral_radius(coefficients: &[f64]) -> f64 {
    let n = coefficients.len();
    if n == 0 {
        return 0.0;
    }
    let companion = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            coefficients[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn validate_spec(spec: SourceSpec) -> Result<ValidatedSpec> {
    if !(spec.noise_std > 0.0) || !spec.noise_std.is_finite() {
        return Err(Error::NonpositiveNoise(spec.noise_std));
    }
    if !spec.mean_shift.is_finite() {
        return Err(Error::NonFiniteInput(spec.mean_shift));
    }
    if let Some(&bad) = spec.coefficients.iter().find(|c| !c.is_finite()) {
        return Err(Error::NonFiniteInput(bad));
    }
    match spec.kind {
        SourceKind::Iid => {}
        SourceKind::Ar | SourceKind::Ma if spec.coefficients.is_empty() => {
            return Err(Error::EmptyCoefficients)
        }
        SourceKind::Ar => {
            let threshold = 1.0 - AR_STABILITY_MARGIN;
            let radius = ar_spectral_radius(&spec.coefficients);
            if !(radius < threshold) {
                return Err(Error::UnstableAr { radius, threshold });
            }
        }
        SourceKind::Ma => {}
    }
    Ok(ValidatedSpec(spec))
}

/// Generator of the i.i.d. driving noise `W_t`.
pub trait Noise {
    fn draw(&mut self) -> f64;
}

/// Seeded Gaussian noise.
#[derive(Clone, Debug)]
pub struct GaussianNoise {
    rng: ChaCha8Rng,
    std: f64,
}

impl GaussianNoise {
    pub fn new(std: f64, seed: u64) -> Self {
        GaussianNoise {
            rng: ChaCha8Rng::seed_from_u64(seed),
            std,
        }
    }
}

impl Noise for GaussianNoise {
    #[inline]
    fn draw(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.std * z
    }
}

/// Replays a fixed noise sequence, then zeros. Test hook for oracle checks.
#[derive(Clone, Debug, Default)]
pub struct ScriptedNoise {
    values: VecDeque<f64>,
}

impl ScriptedNoise {
    pub fn new(values: impl IntoIterator<Item = f64>) -> Self {
        ScriptedNoise {
            values: values.into_iter().collect(),
        }
    }

    pub fn zeros() -> Self {
        ScriptedNoise::default()
    }
}

impl Noise for ScriptedNoise {
    fn draw(&mut self) -> f64 {
        self.values.pop_front().unwrap_or(0.0)
    }
}

/// A sample path of a validated source.
///
/// The lag buffer holds, most recent first, the last `N` centred values (AR)
/// or the last `L` noises (MA). An MA stream primes its buffer with `L` noise
/// draws at construction; an AR stream starts from a zero history unless one
/// is supplied with [`SourceStream::with_history`].
#[derive(Clone, Debug)]
pub struct SourceStream<N = GaussianNoise> {
    kind: SourceKind,
    coefficients: Vec<f64>,
    mean_shift: f64,
    noise: N,
    lags: VecDeque<f64>,
    step: u64,
}

impl SourceStream<GaussianNoise> {
    /// Seeded Gaussian stream, advanced `burn_in` steps.
    pub fn new(spec: &ValidatedSpec, burn_in: usize) -> Self {
        let s = spec.spec();
        let mut stream = SourceStream::with_noise(spec, GaussianNoise::new(s.noise_std, s.seed));
        stream.burn_in(burn_in);
        stream
    }
}

impl<N: Noise> SourceStream<N> {
    /// Stream driven by an arbitrary noise generator, without burn-in.
    pub fn with_noise(spec: &ValidatedSpec, mut noise: N) -> Self {
        let s = spec.spec();
        let lags = match s.kind {
            SourceKind::Iid => VecDeque::new(),
            SourceKind::Ar => std::iter::repeat_n(0.0, s.coefficients.len()).collect(),
            SourceKind::Ma => {
                let mut lags = VecDeque::with_capacity(s.coefficients.len());
                for _ in 1..s.coefficients.len() {
                    lags.push_front(noise.draw());
                }
                lags
            }
        };
        SourceStream {
            kind: s.kind,
            coefficients: s.coefficients.clone(),
            mean_shift: s.mean_shift,
            noise,
            lags,
            step: 0,
        }
    }

    /// Replace the AR history (centred values, most recent first). Missing
    /// lags are zero. No effect for other kinds.
    pub fn with_history(mut self, history: &[f64]) -> Self {
        if self.kind == SourceKind::Ar {
            for (i, lag) in self.lags.iter_mut().enumerate() {
                *lag = history.get(i).copied().unwrap_or(0.0);
            }
        }
        self
    }

    pub fn burn_in(&mut self, steps: usize) {
        for _ in 0..steps {
            self.next_sample();
        }
    }

    /// Number of samples drawn so far, burn-in included.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn next_sample(&mut self) -> f64 {
        let w = self.noise.draw();
        let x = match self.kind {
            SourceKind::Iid => w,
            SourceKind::Ar => {
                let x = dot(&self.coefficients, &self.lags) + w;
                self.lags.pop_back();
                self.lags.push_front(x);
                x
            }
            SourceKind::Ma => {
                let x = self.coefficients[0] * w + dot(&self.coefficients[1..], &self.lags);
                if !self.lags.is_empty() {
                    self.lags.pop_back();
                    self.lags.push_front(w);
                }
                x
            }
        };
        self.step += 1;
        x + self.mean_shift
    }
}

impl<N: Noise> Iterator for SourceStream<N> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_sample())
    }
}

fn dot(coefficients: &[f64], lags: &VecDeque<f64>) -> f64 {
    coefficients.iter().zip(lags).map(|(a, x)| a * x).sum()
}
