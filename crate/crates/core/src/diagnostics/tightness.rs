use super::check_ensemble;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Counts `|s_k| ≥ M` over an ensemble for a grid of radii.
///
/// The Cesàro average `(1/T) Σ_k P(|S_k| ≥ M)` estimated from `n` runs of
/// length `T` is the pooled fraction of all `nT` states outside the ball.
#[derive(Clone, Debug, PartialEq)]
pub struct TightnessCounter {
    radii: Vec<f64>,
    exceed: Vec<u64>,
    samples: u64,
    len: Option<usize>,
}

impl TightnessCounter {
    pub fn new(mut radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::invalid("M", "radii must be positive"));
        }
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        Ok(TightnessCounter {
            exceed: vec![0; radii.len()],
            radii,
            samples: 0,
            len: None,
        })
    }

    pub fn push(&mut self, traj: &Trajectory) -> Result<()> {
        match self.len {
            Some(len) if len != traj.len() => {
                return Err(Error::RaggedEnsemble {
                    expected: len,
                    found: traj.len(),
                })
            }
            _ => self.len = Some(traj.len()),
        }
        for &s in &traj.s {
            let mag = s.abs();
            // radii ascending: every radius up to the first one above |s| counts
            let hit = self.radii.partition_point(|&m| m <= mag);
            for count in &mut self.exceed[..hit] {
                *count += 1;
            }
        }
        self.samples += traj.len() as u64;
        Ok(())
    }

    /// `(M, value)` pairs in ascending `M`.
    pub fn curve(&self) -> Result<Vec<(f64, f64)>> {
        if self.samples == 0 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(self
            .radii
            .iter()
            .zip(&self.exceed)
            .map(|(&m, &c)| (m, c as f64 / self.samples as f64))
            .collect())
    }

    pub fn value_at(&self, radius: f64) -> Result<f64> {
        let i = self
            .radii
            .iter()
            .position(|&m| m == radius)
            .ok_or_else(|| Error::invalid("M", format!("{radius} is not on the grid")))?;
        Ok(self.curve()?[i].1)
    }
}

pub fn tightness_statistic(trajs: &[Trajectory], radius: f64) -> Result<f64> {
    tightness_curve(trajs, &[radius]).map(|c| c[0].1)
}

pub fn tightness_curve(trajs: &[Trajectory], radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_ensemble(trajs)?;
    let mut counter = TightnessCounter::new(radii.to_vec())?;
    for t in trajs {
        counter.push(t)?;
    }
    counter.curve()
}
