use super::lattice::{steps_gcd, LogSpacing, StepLattice};
use crate::error::{finite, Error, Result};
use crate::quantizers::UniformQuantizer;

/// Requested versus realized multiplier after snapping to the lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoomRounding {
    pub requested: f64,
    pub exponent: i64,
    pub realized: f64,
}

/// Constants of the zoom quantizer and certainty-equivalent controller.
///
/// Step sizes live on a [`StepLattice`] anchored at `Δ_0`. The zoom-out factor
/// `|a| + δ` and the zoom-in factor `α` are snapped to the nearest lattice
/// powers `2^(k * spacing)` at construction; see [`ZoomParams::expansion`]
/// and [`ZoomParams::contraction`] for what was realized.
#[derive(Clone, Debug, PartialEq)]
pub struct ZoomParams {
    a: f64,
    b: f64,
    quantizer_levels: u32,
    floor: f64,
    lattice: StepLattice,
    expansion: ZoomRounding,
    contraction: ZoomRounding,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoomState {
    pub xhat: f64,
    pub log_index: i64,
}

impl ZoomState {
    pub fn initial() -> Self {
        ZoomState {
            xhat: 0.0,
            log_index: 0,
        }
    }
}

/// Result of one zoom update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoomStep {
    pub state: ZoomState,
    pub control: f64,
    pub overflow: bool,
}

impl ZoomParams {
    /// * `levels`: `K`, number of granular bins.
    /// * `expansion`: requested `|a| + δ`, must realize above `|a|`.
    /// * `contraction`: requested `α ∈ (0, 1)`.
    /// * `floor`: `L`; zoom-in stops once `Δ < L`.
    /// * `delta0`: initial step size, anchors the lattice.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: f64,
        b: f64,
        levels: u32,
        expansion: f64,
        contraction: f64,
        floor: f64,
        delta0: f64,
        spacing: LogSpacing,
        require_coprime: bool,
    ) -> Result<Self> {
        let a = finite(a)?;
        if !(b != 0.0) || !b.is_finite() {
            return Err(Error::invalid("b", "must be finite and nonzero"));
        }
        UniformQuantizer::new(levels, 1.0)?;
        if !(floor > 0.0) || !floor.is_finite() {
            return Err(Error::invalid("floor", format!("L must be positive, got {floor}")));
        }
        if !(contraction > 0.0 && contraction < 1.0) {
            return Err(Error::invalid("contraction", format!("alpha must lie in (0, 1), got {contraction}")));
        }
        if !(expansion > a.abs()) || !expansion.is_finite() {
            return Err(Error::invalid(
                "expansion",
                format!("|a| + delta must exceed |a| = {}, got {expansion}", a.abs()),
            ));
        }
        let lattice = StepLattice::anchored_at(delta0, spacing)?;
        let snap = |requested: f64| {
            let exponent = lattice.nearest_exponent(requested);
            ZoomRounding {
                requested,
                exponent,
                realized: lattice.factor(exponent),
            }
        };
        let expansion = snap(expansion);
        let contraction = snap(contraction);
        if !(expansion.realized > a.abs()) {
            return Err(Error::invalid(
                "expansion",
                format!(
                    "snapped to {} which does not exceed |a| = {}; use a finer lattice",
                    expansion.realized,
                    a.abs()
                ),
            ));
        }
        if contraction.exponent >= 0 {
            return Err(Error::invalid(
                "contraction",
                format!("alpha = {} snapped to 1 or above; use a finer lattice", contraction.requested),
            ));
        }
        let params = ZoomParams {
            a,
            b,
            quantizer_levels: levels,
            floor,
            lattice,
            expansion,
            contraction,
        };
        if require_coprime && !params.is_coprime() {
            return Err(Error::invalid(
                "expansion",
                format!(
                    "lattice exponents {} and {} are not relatively prime",
                    expansion.exponent, contraction.exponent
                ),
            ));
        }
        Ok(params)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn levels(&self) -> u32 {
        self.quantizer_levels
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn lattice(&self) -> StepLattice {
        self.lattice
    }

    pub fn expansion(&self) -> ZoomRounding {
        self.expansion
    }

    pub fn contraction(&self) -> ZoomRounding {
        self.contraction
    }

    /// `R' = log2 K`.
    pub fn reduced_rate(&self) -> f64 {
        (self.quantizer_levels as f64).log2()
    }

    /// `R = log2 (K + 1)`.
    pub fn rate(&self) -> f64 {
        (self.quantizer_levels as f64 + 1.0).log2()
    }

    pub fn exponents(&self) -> [i64; 2] {
        [self.expansion.exponent, self.contraction.exponent]
    }

    pub fn is_coprime(&self) -> bool {
        steps_gcd(&self.exponents()) == 1
    }

    pub fn delta(&self, state: &ZoomState) -> f64 {
        self.lattice.delta(state.log_index)
    }
}

/// One step of the zoom policy:
/// `X̂ = Q_K^Δ(x)`, `U = -(a/b) X̂`, and `Δ' = Δ (|a|+δ)` on overflow of the
/// normalized magnitude `|x| / (Δ 2^(R'-1))`, `Δ α` when inside and `Δ ≥ L`,
/// unchanged otherwise.
pub fn zoom_step(params: &ZoomParams, state: &ZoomState, x: f64) -> Result<ZoomStep> {
    let x = finite(x)?;
    let delta = params.delta(state);
    let quantized = UniformQuantizer::new(params.quantizer_levels, delta)?.quantize(x)?;
    let xhat = quantized.value;
    let control = -(params.a / params.b) * xhat;
    // 2^(R'-1) = K/2
    let r = (x / (delta * (params.quantizer_levels as f64 / 2.0))).abs();
    let exponent = if r > 1.0 {
        params.expansion.exponent
    } else if delta >= params.floor {
        params.contraction.exponent
    } else {
        0
    };
    Ok(ZoomStep {
        state: ZoomState {
            xhat,
            log_index: state.log_index + exponent,
        },
        control,
        overflow: quantized.overflow,
    })
}

/// Minimum rate for stabilization of `x' = a x + b u + w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateRequirement {
    /// `log2(ceil|a| + 1)`; the rate `log2(K + 1)` must exceed this.
    pub threshold: f64,
    /// Smallest `K` with `log2(K + 1) > threshold`.
    pub k_min: u32,
    /// `K = ceil(|a| + ε)` as used by the zoom policy.
    pub k_policy: u32,
}

pub const DEFAULT_RATE_EPSILON: f64 = 0.01;

pub fn required_rate(a: f64) -> Result<RateRequirement> {
    required_rate_with_epsilon(a, DEFAULT_RATE_EPSILON)
}

pub fn required_rate_with_epsilon(a: f64, epsilon: f64) -> Result<RateRequirement> {
    let a = finite(a)?.abs();
    if a < 1.0 {
        return Err(Error::Domain(format!("|a| = {a} < 1; the open-loop plant is already stable")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    let ceil = a.ceil();
    let threshold = (ceil + 1.0).log2();
    let mut k_min = ceil as u32;
    while ((k_min as f64) + 1.0).log2() <= threshold {
        k_min += 1;
    }
    Ok(RateRequirement {
        threshold,
        k_min,
        k_policy: (a + epsilon).ceil() as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(levels: u32, floor: f64, delta0: f64) -> ZoomParams {
        ZoomParams::new(2.0, 1.0, levels, 4.0, 0.5, floor, delta0, LogSpacing::ONE, true).unwrap()
    }

    #[test]
    fn zoom_out_on_overflow() {
        let p = params(3, 1.0, 1.0);
        let out = zoom_step(&p, &ZoomState::initial(), 5.0).unwrap();
        assert_eq!(p.delta(&out.state), 4.0);
        assert!(out.overflow);
        assert_eq!(out.control, 0.0);
    }

    #[test]
    fn zoom_in_above_floor() {
        let p = params(3, 1.0, 2.0);
        let out = zoom_step(&p, &ZoomState::initial(), 1.2).unwrap();
        assert_eq!(p.delta(&out.state), 1.0);
        assert_eq!(out.state.xhat, 2.0);
        assert_eq!(out.control, -4.0);
    }

    #[test]
    fn hold_below_floor() {
        let p = params(3, 1.0, 0.5);
        let out = zoom_step(&p, &ZoomState::initial(), 0.3).unwrap();
        assert_eq!(p.delta(&out.state), 0.5);
        assert_eq!(out.state.xhat, 0.5);
    }

    #[test]
    fn boundary_of_normalized_magnitude() {
        // K = 2: r = |x| / Δ, r = 1 is inside.
        let p = params(2, 1.0, 1.0);
        let edge = zoom_step(&p, &ZoomState::initial(), 1.0).unwrap();
        assert_eq!(p.delta(&edge.state), 0.5);
        assert_eq!(edge.state.xhat, 0.5);
        let beyond = zoom_step(&p, &ZoomState::initial(), 1.0 + 1e-12).unwrap();
        assert_eq!(p.delta(&beyond.state), 4.0);
    }

    #[test]
    fn ratio_is_one_of_three_values() {
        let p = params(3, 1.0, 1.0);
        let mut state = ZoomState::initial();
        let xs = [0.1, 7.0, -30.0, 2.0, 0.0, 0.3, 0.2, -0.1, 90.0, 1.0];
        for x in xs {
            let before = p.delta(&state);
            state = zoom_step(&p, &state, x).unwrap().state;
            let ratio = p.delta(&state) / before;
            assert!([4.0, 0.5, 1.0].contains(&ratio), "ratio {ratio}");
            assert!(p.delta(&state) >= 0.5 * p.floor());
        }
    }

    #[test]
    fn factors_are_snapped_and_reported() {
        let p = ZoomParams::new(2.0, 1.0, 3, 3.7, 0.45, 1.0, 1.0, LogSpacing::ONE, true).unwrap();
        assert_eq!(p.expansion().realized, 4.0);
        assert_eq!(p.expansion().requested, 3.7);
        assert_eq!(p.contraction().realized, 0.5);
        assert!(p.is_coprime());

        // 2.2 snaps to 2 = |a|, which is no longer an expansion.
        assert!(ZoomParams::new(2.0, 1.0, 3, 2.2, 0.5, 1.0, 1.0, LogSpacing::ONE, false).is_err());
        // On a half-integer lattice 2.9 snaps to 2^(3/2).
        let fine = ZoomParams::new(2.0, 1.0, 3, 2.9, 0.5, 1.0, 1.0, LogSpacing::new(1, 2).unwrap(), false).unwrap();
        assert_eq!(fine.exponents(), [3, -2]);
        assert!(fine.is_coprime());
        let even = ZoomParams::new(2.0, 1.0, 3, 4.0, 0.5, 1.0, 1.0, LogSpacing::new(1, 2).unwrap(), false).unwrap();
        assert_eq!(even.exponents(), [4, -2]);
        assert!(!even.is_coprime());
        assert!(ZoomParams::new(2.0, 1.0, 3, 4.0, 0.5, 1.0, 1.0, LogSpacing::new(1, 2).unwrap(), true).is_err());
    }

    #[test]
    fn parameter_errors() {
        let s = LogSpacing::ONE;
        assert!(ZoomParams::new(2.0, 0.0, 3, 4.0, 0.5, 1.0, 1.0, s, false).is_err());
        assert!(ZoomParams::new(2.0, 1.0, 0, 4.0, 0.5, 1.0, 1.0, s, false).is_err());
        assert!(ZoomParams::new(2.0, 1.0, 3, 4.0, 1.0, 1.0, 1.0, s, false).is_err());
        assert!(ZoomParams::new(2.0, 1.0, 3, 4.0, 0.5, 0.0, 1.0, s, false).is_err());
        assert!(ZoomParams::new(2.0, 1.0, 3, 1.5, 0.5, 1.0, 1.0, s, false).is_err());
    }

    #[test]
    fn rate_examples() {
        let r = required_rate(2.0).unwrap();
        assert_eq!(r.threshold, 3f64.log2());
        assert_eq!((r.k_min, r.k_policy), (3, 3));
        assert!((4f64).log2() > r.threshold);

        let r = required_rate(1.0).unwrap();
        assert_eq!(r.threshold, 1.0);
        assert_eq!(r.k_min, 2);

        let r = required_rate(3.5).unwrap();
        assert!((r.threshold - 2.321_928_094_887_362).abs() < 1e-12);
        assert_eq!((r.k_min, r.k_policy), (5, 4));

        assert!(matches!(required_rate(0.5), Err(Error::Domain(_))));
        assert_eq!(required_rate(-2.0).unwrap().k_min, 3);
    }

    #[test]
    fn rate_is_monotone() {
        let mut prev = required_rate(1.0).unwrap();
        for i in 1..400 {
            let next = required_rate(1.0 + i as f64 * 0.037).unwrap();
            assert!(next.threshold >= prev.threshold);
            assert!(next.k_min >= prev.k_min);
            prev = next;
        }
    }
}
