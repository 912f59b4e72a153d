//! Static quantizer maps used inside the adaptive schemes.

use crate::error::{finite, Error, Result};

/// Uniform quantizer with `K` granular bins of width `Δ` centred on zero,
/// plus one overflow symbol (`K + 1` bins in total).
///
/// Bin `k ∈ 1..=K` is the half-open interval `[(k-1-K/2)Δ, (k-K/2)Δ)` and is
/// reconstructed at `(k - (K+1)/2)Δ`. The right end point `KΔ/2` maps to the
/// top level. Anything outside `[-KΔ/2, KΔ/2]` returns `0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformQuantizer {
    levels: u32,
    bin: f64,
}

/// Quantizer output together with its overflow flag.
///
/// For odd `K` zero is also a granular level, so the flag is the only
/// unambiguous overflow signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantized {
    pub value: f64,
    pub overflow: bool,
}

impl UniformQuantizer {
    pub fn new(levels: u32, bin: f64) -> Result<Self> {
        if levels == 0 {
            return Err(Error::invalid("K", "at least one granular bin is required"));
        }
        if !(bin > 0.0) || !bin.is_finite() {
            return Err(Error::invalid("delta", format!("bin size must be positive, got {bin}")));
        }
        Ok(UniformQuantizer { levels, bin })
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn bin(&self) -> f64 {
        self.bin
    }

    /// Upper end of the granular region, `KΔ/2`.
    pub fn half_range(&self) -> f64 {
        self.edge(self.levels)
    }

    /// Edge `(j - K/2)Δ`; bin `k` is `[edge(k-1), edge(k))`.
    #[inline]
    fn edge(&self, j: u32) -> f64 {
        (j as f64 - self.levels as f64 / 2.0) * self.bin
    }

    #[inline]
    fn level(&self, k: u32) -> f64 {
        (k as f64 - (self.levels as f64 + 1.0) / 2.0) * self.bin
    }

    pub fn quantize(&self, x: f64) -> Result<Quantized> {
        let x = finite(x)?;
        let k_max = self.levels;
        if x >= self.edge(0) && x < self.edge(k_max) {
            // Guess from the scaled input, then settle against the exact edges.
            let guess = ((x / self.bin) + k_max as f64 / 2.0).floor() + 1.0;
            let mut k = guess.clamp(1.0, k_max as f64) as u32;
            while k > 1 && x < self.edge(k - 1) {
                k -= 1;
            }
            while k < k_max && x >= self.edge(k) {
                k += 1;
            }
            return Ok(Quantized {
                value: self.level(k),
                overflow: false,
            });
        }
        if x == self.half_range() {
            return Ok(Quantized {
                value: (self.levels as f64 - 1.0) / 2.0 * self.bin,
                overflow: false,
            });
        }
        Ok(Quantized {
            value: 0.0,
            overflow: true,
        })
    }

    /// Set of all reconstruction values, overflow symbol included.
    pub fn alphabet(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (1..=self.levels).map(|k| self.level(k)).collect();
        out.push(0.0);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

pub fn uniform_quantize(q: &UniformQuantizer, x: f64) -> Result<f64> {
    q.quantize(x).map(|out| out.value)
}

/// One-bit quantizer `z ↦ +m` for `z ≥ 0`, `-m` otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinaryQuantizer {
    half_step: f64,
}

impl BinaryQuantizer {
    pub fn new(half_step: f64) -> Result<Self> {
        if !(half_step > 0.0) || !half_step.is_finite() {
            return Err(Error::invalid("m", format!("must be positive, got {half_step}")));
        }
        Ok(BinaryQuantizer { half_step })
    }

    pub fn half_step(&self) -> f64 {
        self.half_step
    }

    #[inline]
    pub fn quantize(&self, z: f64) -> Result<f64> {
        let z = finite(z)?;
        Ok(if z >= 0.0 {
            self.half_step
        } else {
            -self.half_step
        })
    }
}

pub fn binary_quantize(q: &BinaryQuantizer, z: f64) -> Result<f64> {
    q.quantize(z)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn q(k: u32, d: f64) -> UniformQuantizer {
        UniformQuantizer::new(k, d).unwrap()
    }

    #[test]
    fn piecewise_cases() {
        assert_eq!(uniform_quantize(&q(2, 1.0), 0.3).unwrap(), 0.5);
        assert_eq!(uniform_quantize(&q(2, 1.0), 1.0).unwrap(), 0.5);
        assert_eq!(uniform_quantize(&q(2, 1.0), 1.7).unwrap(), 0.0);
        assert_eq!(uniform_quantize(&q(4, 0.5), -1.0).unwrap(), -0.75);
    }

    #[test]
    fn interior_edges_go_right() {
        let quant = q(4, 1.0);
        assert_eq!(uniform_quantize(&quant, 0.0).unwrap(), 0.5);
        assert_eq!(uniform_quantize(&quant, -1.0).unwrap(), -0.5);
        assert_eq!(uniform_quantize(&quant, -2.0).unwrap(), -1.5);
        assert!(quant.quantize(-2.000_000_1).unwrap().overflow);
    }

    #[test]
    fn odd_levels_flag_overflow_separately() {
        let quant = q(3, 1.0);
        let inside = quant.quantize(0.2).unwrap();
        let outside = quant.quantize(9.0).unwrap();
        assert_eq!(inside, Quantized { value: 0.0, overflow: false });
        assert_eq!(outside, Quantized { value: 0.0, overflow: true });
        assert_eq!(quant.quantize(1.5).unwrap().value, 1.0);
        assert_eq!(quant.alphabet(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_parameters_and_inputs() {
        assert!(UniformQuantizer::new(0, 1.0).is_err());
        assert!(UniformQuantizer::new(2, 0.0).is_err());
        assert!(UniformQuantizer::new(2, f64::NAN).is_err());
        assert!(matches!(q(2, 1.0).quantize(f64::NAN), Err(Error::NonFiniteInput(_))));
        assert!(BinaryQuantizer::new(0.0).is_err());
        assert!(BinaryQuantizer::new(1.0).unwrap().quantize(f64::INFINITY).is_err());
    }

    #[test]
    fn binary_cases() {
        let one = BinaryQuantizer::new(1.0).unwrap();
        assert_eq!(binary_quantize(&one, 0.0).unwrap(), 1.0);
        assert_eq!(binary_quantize(&one, -0.001).unwrap(), -1.0);
        assert_eq!(binary_quantize(&BinaryQuantizer::new(2.5).unwrap(), 7.0).unwrap(), 2.5);
    }

    proptest! {
        #[test]
        fn granular_error_is_at_most_half_bin(half in 1u32..=8, d in 1e-3f64..10.0, u in -1.0f64..1.0) {
            let quant = q(2 * half, d);
            let x = u * quant.half_range();
            prop_assume!(x.abs() < quant.half_range());
            let y = uniform_quantize(&quant, x).unwrap();
            prop_assert!((y - x).abs() <= d / 2.0 * (1.0 + 1e-12));
        }

        #[test]
        fn output_is_in_alphabet(k in 1u32..=16, d in 1e-3f64..10.0, x in -200.0f64..200.0) {
            let quant = q(k, d);
            let alphabet = quant.alphabet();
            prop_assert!(alphabet.len() <= k as usize + 1);
            let y = uniform_quantize(&quant, x).unwrap();
            prop_assert!(alphabet.contains(&y));
        }

        #[test]
        fn binary_output_is_plus_or_minus_m(m in 1e-6f64..1e6, z in proptest::num::f64::NORMAL) {
            let y = BinaryQuantizer::new(m).unwrap().quantize(z).unwrap();
            prop_assert!(y == m || y == -m);
        }
    }
}
