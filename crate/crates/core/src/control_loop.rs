//! Closed-loop simulation of `X_{t+1} = a X_t + b U_t + W_t` with the zoom
//! quantizer in the feedback path.

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::schemes::{zoom_step, ZoomParams, ZoomState};
use crate::simulation::System;
use crate::sources::{GaussianNoise, Noise, ScriptedNoise};
use crate::trajectory::{ControlRecord, Divergence, Trajectory, DIVERGENCE_THRESHOLD};

/// Scalar plant driven by i.i.d. Gaussian noise.
///
/// `noise_std = 0` gives the deterministic plant. `noise_moment_exponent` is
/// the `ζ' > 0` of the moment assumption `E|W|^(2+ζ') < ∞`; Gaussian noise
/// satisfies it for every value, so it is recorded rather than used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub a: f64,
    pub b: f64,
    pub noise_std: f64,
    #[serde(default = "default_moment_exponent")]
    pub noise_moment_exponent: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub x0: f64,
}

fn default_moment_exponent() -> f64 {
    1.0
}

impl PlantSpec {
    pub fn new(a: f64, b: f64, noise_std: f64) -> Self {
        PlantSpec {
            a,
            b,
            noise_std,
            noise_moment_exponent: default_moment_exponent(),
            seed: 0,
            x0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(finite(self.a)?.abs() >= 1.0) {
            return Err(Error::Domain(format!("plant requires |a| >= 1, got a = {}", self.a)));
        }
        if finite(self.b)? == 0.0 {
            return Err(Error::invalid("b", "must be nonzero"));
        }
        if !(finite(self.noise_std)? >= 0.0) {
            return Err(Error::NonpositiveNoise(self.noise_std));
        }
        if !(self.noise_moment_exponent > 0.0) {
            return Err(Error::invalid("noise_moment_exponent", "must be positive"));
        }
        finite(self.x0)?;
        Ok(())
    }
}

/// Plant plus zoom controller.
#[derive(Clone, Debug)]
pub struct ClosedLoop {
    plant: PlantSpec,
    zoom: ZoomParams,
    open_loop: bool,
}

impl ClosedLoop {
    pub fn new(plant: PlantSpec, zoom: ZoomParams) -> Result<Self> {
        plant.validate()?;
        if plant.a != zoom.a() || plant.b != zoom.b() {
            return Err(Error::invalid(
                "zoom",
                format!(
                    "controller built for (a, b) = ({}, {}) but plant has ({}, {})",
                    zoom.a(),
                    zoom.b(),
                    plant.a,
                    plant.b
                ),
            ));
        }
        Ok(ClosedLoop {
            plant,
            zoom,
            open_loop: false,
        })
    }

    /// Keep the quantizer running but apply `u = 0` to the plant.
    pub fn open_loop(mut self, open: bool) -> Self {
        self.open_loop = open;
        self
    }

    pub fn plant(&self) -> &PlantSpec {
        &self.plant
    }

    pub fn zoom(&self) -> &ZoomParams {
        &self.zoom
    }

    pub fn run_with_noise<N: Noise>(&self, x0: f64, zoom: ZoomState, noise: &mut N, horizon: usize) -> Result<Trajectory> {
        let mut traj = Trajectory::with_capacity(horizon);
        let mut record = ControlRecord {
            xhat: Vec::with_capacity(horizon),
            u: Vec::with_capacity(horizon),
            overflow: Vec::with_capacity(horizon),
        };
        let (a, b) = (self.plant.a, self.plant.b);
        let mut x = finite(x0)?;
        let mut state = zoom;
        for t in 0..horizon {
            let step = zoom_step(&self.zoom, &state, x)?;
            traj.push(x, self.zoom.delta(&state));
            record.xhat.push(step.state.xhat);
            record.u.push(step.control);
            record.overflow.push(step.overflow);

            let u = if self.open_loop { 0.0 } else { step.control };
            let next = a * x + b * u + noise.draw();
            state = step.state;
            if !(next.abs() <= DIVERGENCE_THRESHOLD) {
                traj.divergence = Some(Divergence {
                    step: t + 1,
                    magnitude: next.abs(),
                });
                let inf = f64::INFINITY.copysign(next);
                for _ in t + 1..horizon {
                    traj.push(inf, f64::INFINITY);
                    record.xhat.push(0.0);
                    record.u.push(0.0);
                    record.overflow.push(true);
                }
                break;
            }
            x = next;
        }
        traj.control = Some(record);
        Ok(traj)
    }
}

impl System for ClosedLoop {
    /// `initial` is `x_0`; the quantizer starts at `Δ_0` (lattice index 0).
    fn simulate(&self, initial: f64, seed: u64, len: usize) -> Result<Trajectory> {
        if self.plant.noise_std == 0.0 {
            self.run_with_noise(initial, ZoomState::initial(), &mut ScriptedNoise::zeros(), len)
        } else {
            let mut noise = GaussianNoise::new(self.plant.noise_std, seed);
            self.run_with_noise(initial, ZoomState::initial(), &mut noise, len)
        }
    }
}

/// Runs the loop from `plant.x0` with the plant's own seed.
pub fn run_closed_loop(plant: &PlantSpec, zoom: &ZoomParams, initial: ZoomState, horizon: usize) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let lp = ClosedLoop::new(plant.clone(), zoom.clone())?;
    if plant.noise_std == 0.0 {
        lp.run_with_noise(plant.x0, initial, &mut ScriptedNoise::zeros(), horizon)
    } else {
        let mut noise = GaussianNoise::new(plant.noise_std, plant.seed);
        lp.run_with_noise(plant.x0, initial, &mut noise, horizon)
    }
}

/// Per-time ensemble statistics of closed-loop runs, reduced in trajectory
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMoments {
    p: f64,
    sum_moment: Vec<f64>,
    sum_sq_x: Vec<f64>,
    sum_sq_delta: Vec<f64>,
    overflow: Vec<u64>,
    diverged: usize,
    n: usize,
}

impl EnsembleMoments {
    pub fn new(p: f64, len: usize) -> Result<Self> {
        if !(p > 0.0) {
            return Err(Error::invalid("p", "moment order must be positive"));
        }
        Ok(EnsembleMoments {
            p,
            sum_moment: vec![0.0; len],
            sum_sq_x: vec![0.0; len],
            sum_sq_delta: vec![0.0; len],
            overflow: vec![0; len],
            diverged: 0,
            n: 0,
        })
    }

    pub fn push(&mut self, traj: &Trajectory) -> Result<()> {
        if traj.len() != self.sum_moment.len() {
            return Err(Error::RaggedEnsemble {
                expected: self.sum_moment.len(),
                found: traj.len(),
            });
        }
        for t in 0..traj.len() {
            let (x, d) = (traj.x[t], traj.s[t]);
            self.sum_moment[t] += x.abs().powf(self.p) + d.abs().powf(self.p);
            self.sum_sq_x[t] += x * x;
            self.sum_sq_delta[t] += d * d;
        }
        if let Some(rec) = &traj.control {
            for (count, &flag) in self.overflow.iter_mut().zip(&rec.overflow) {
                *count += flag as u64;
            }
        }
        self.diverged += traj.diverged() as usize;
        self.n += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn diverged(&self) -> usize {
        self.diverged
    }

    fn mean(&self, sums: &[f64]) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(sums.iter().map(|s| s / self.n as f64).collect())
    }

    /// `t ↦ mean(|x_t|^p + Δ_t^p)`.
    pub fn moment_curve(&self) -> Result<Vec<f64>> {
        self.mean(&self.sum_moment)
    }

    pub fn mean_sq_x(&self) -> Result<Vec<f64>> {
        self.mean(&self.sum_sq_x)
    }

    pub fn mean_sq_delta(&self) -> Result<Vec<f64>> {
        self.mean(&self.sum_sq_delta)
    }

    pub fn frac_overflow(&self) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(self.overflow.iter().map(|&c| c as f64 / self.n as f64).collect())
    }
}

/// Ensemble average of `|x_t|^p + Δ_t^p` at each time.
pub fn moment_curve(ensemble: &[Trajectory], p: f64) -> Result<Vec<f64>> {
    let first = ensemble.first().ok_or(Error::EmptyEnsemble)?;
    let mut acc = EnsembleMoments::new(p, first.len())?;
    for traj in ensemble {
        acc.push(traj)?;
    }
    acc.moment_curve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::LogSpacing;

    fn zoom(levels: u32) -> ZoomParams {
        ZoomParams::new(2.0, 1.0, levels, 4.0, 0.5, 1.0, 1.0, LogSpacing::ONE, true).unwrap()
    }

    #[test]
    fn plant_validation() {
        assert!(PlantSpec::new(0.5, 1.0, 1.0).validate().is_err());
        assert!(PlantSpec::new(2.0, 0.0, 1.0).validate().is_err());
        assert!(PlantSpec::new(2.0, 1.0, -1.0).validate().is_err());
        assert!(PlantSpec::new(-2.0, 1.0, 0.0).validate().is_ok());
    }

    #[test]
    fn mismatched_controller_is_rejected() {
        assert!(ClosedLoop::new(PlantSpec::new(3.0, 1.0, 1.0), zoom(3)).is_err());
    }

    #[test]
    fn noise_free_loop_settles() {
        let mut plant = PlantSpec::new(2.0, 1.0, 0.0);
        plant.x0 = 0.7;
        let p = zoom(3);
        let traj = run_closed_loop(&plant, &p, ZoomState::initial(), 400).unwrap();
        assert!(!traj.diverged());
        let floor_hit = traj.s.iter().position(|&d| d < p.floor()).expect("reaches floor");
        for t in floor_hit..traj.len() - 1 {
            assert_eq!(traj.s[t + 1], traj.s[t]);
            // x_{t+1} = a (x_t - xhat_t) with |x_t - xhat_t| <= Δ/2
            assert!(traj.x[t + 1].abs() <= 2.0 * traj.s[t] / 2.0);
        }
        assert_eq!(*traj.x.last().unwrap(), 0.0);
        assert!(traj.s.iter().all(|&d| d >= 0.5 * p.floor()));
    }

    #[test]
    fn open_loop_grows_like_a_power_of_a() {
        let mut plant = PlantSpec::new(2.0, 1.0, 0.0);
        plant.x0 = 1.0;
        let lp = ClosedLoop::new(plant, zoom(3)).unwrap().open_loop(true);
        let traj = lp.run_with_noise(1.0, ZoomState::initial(), &mut ScriptedNoise::zeros(), 60).unwrap();
        for t in 0..60 {
            assert_eq!(traj.x[t], 2f64.powi(t as i32));
        }
        let guarded = lp.run_with_noise(1.0, ZoomState::initial(), &mut ScriptedNoise::zeros(), 200).unwrap();
        let div = guarded.divergence.unwrap();
        assert_eq!(div.step, 100);
        assert!(guarded.x[150].is_infinite());
        assert!(matches!(guarded.ensure_finite(), Err(Error::NonFiniteState { step: 100, .. })));
        assert_eq!(guarded.len(), 200);
    }

    #[test]
    fn runs_are_reproducible() {
        let lp = ClosedLoop::new(PlantSpec::new(2.0, 1.0, 1.0), zoom(3)).unwrap();
        assert_eq!(lp.simulate(0.0, 11, 500).unwrap(), lp.simulate(0.0, 11, 500).unwrap());
        assert_ne!(lp.simulate(0.0, 11, 500).unwrap(), lp.simulate(0.0, 12, 500).unwrap());
    }

    #[test]
    fn moment_curve_cases() {
        assert!(matches!(moment_curve(&[], 2.0), Err(Error::EmptyEnsemble)));
        let zeros = Trajectory::from_parts(vec![0.0; 5], vec![0.0; 5]);
        assert_eq!(moment_curve(&[zeros.clone(), zeros], 2.0).unwrap(), vec![0.0; 5]);
        let constant = Trajectory::from_parts(vec![3.0; 4], vec![2.0; 4]);
        assert_eq!(moment_curve(&[constant], 2.0).unwrap(), vec![13.0; 4]);
        let short = Trajectory::from_parts(vec![0.0; 2], vec![0.0; 2]);
        let long = Trajectory::from_parts(vec![0.0; 3], vec![0.0; 3]);
        assert!(moment_curve(&[short, long], 2.0).is_err());
    }
}
