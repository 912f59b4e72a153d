use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positive rational `num/den`, the log2 spacing of a step-size lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[i64; 2]", into = "[i64; 2]")]
pub struct LogSpacing {
    num: i64,
    den: i64,
}

impl LogSpacing {
    pub const ONE: LogSpacing = LogSpacing { num: 1, den: 1 };

    pub fn new(num: i64, den: i64) -> Result<Self> {
        if num <= 0 || den <= 0 {
            return Err(Error::invalid(
                "m_lattice",
                format!("spacing must be a positive ratio, got {num}/{den}"),
            ));
        }
        let g = gcd(num, den);
        Ok(LogSpacing {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl TryFrom<[i64; 2]> for LogSpacing {
    type Error = Error;

    fn try_from([num, den]: [i64; 2]) -> Result<Self> {
        LogSpacing::new(num, den)
    }
}

impl From<LogSpacing> for [i64; 2] {
    fn from(s: LogSpacing) -> Self {
        [s.num, s.den]
    }
}

impl std::fmt::Display for LogSpacing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Step sizes `Δ_j = 2^(log2_base + j * spacing)` indexed by an integer `j`.
///
/// The index is the state; `Δ` is only materialized on demand. Whole powers of
/// two are applied by exponent scaling, so with `log2_base = 0` and an integer
/// spacing every `Δ_j` is an exact power of two.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLattice {
    log2_base: f64,
    spacing: LogSpacing,
}

impl StepLattice {
    pub fn new(log2_base: f64, spacing: LogSpacing) -> Result<Self> {
        if !log2_base.is_finite() {
            return Err(Error::NonFiniteInput(log2_base));
        }
        Ok(StepLattice { log2_base, spacing })
    }

    /// Lattice whose index 0 is the given initial step size.
    pub fn anchored_at(delta0: f64, spacing: LogSpacing) -> Result<Self> {
        if !(delta0 > 0.0) || !delta0.is_finite() {
            return Err(Error::invalid("delta0", format!("must be positive, got {delta0}")));
        }
        StepLattice::new(delta0.log2(), spacing)
    }

    pub fn spacing(&self) -> LogSpacing {
        self.spacing
    }

    pub fn log2_base(&self) -> f64 {
        self.log2_base
    }

    pub fn log2_delta(&self, index: i64) -> f64 {
        self.log2_base + (index as f64) * self.spacing.value()
    }

    pub fn delta(&self, index: i64) -> f64 {
        let scaled = index * self.spacing.num;
        let whole = scaled.div_euclid(self.spacing.den);
        let frac = scaled.rem_euclid(self.spacing.den) as f64 / self.spacing.den as f64;
        let mantissa = (self.log2_base + frac).exp2();
        mantissa * pow2(whole)
    }

    /// Nearest lattice exponent `k` with `2^(k * spacing) ≈ factor`.
    pub fn nearest_exponent(&self, factor: f64) -> i64 {
        (factor.log2() / self.spacing.value()).round() as i64
    }

    /// Exact multiplicative factor `2^(k * spacing)`.
    pub fn factor(&self, exponent: i64) -> f64 {
        StepLattice::new(0.0, self.spacing)
            .expect("zero base is finite")
            .delta(exponent)
    }
}

fn pow2(e: i64) -> f64 {
    let e = e.clamp(-1074, 1024) as i32;
    if e >= -1022 {
        f64::from_bits(((e + 1023) as u64).min(2047) << 52)
    } else {
        2f64.powi(e)
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

/// gcd of the nonzero entries (0 when there are none).
pub fn steps_gcd(steps: &[i64]) -> i64 {
    steps.iter().filter(|&&s| s != 0).fold(0, |g, &s| gcd(g, s))
}

/// Lattice indices reachable from 0 by at most `horizon` applications of the
/// given integer steps (breadth-first over step counts).
pub fn lattice_reachability(steps: &[i64], horizon: usize) -> BTreeSet<i64> {
    let mut distinct: Vec<i64> = steps.to_vec();
    distinct.sort_unstable();
    distinct.dedup();

    let mut reached = BTreeSet::from([0]);
    let mut frontier = vec![0i64];
    for _ in 0..horizon {
        let mut next = Vec::new();
        for &j in &frontier {
            for &step in &distinct {
                let k = j + step;
                if reached.insert(k) {
                    next.push(k);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    reached
}
