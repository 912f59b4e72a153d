//! Empirical stability diagnostics for `(X_k, S_k)` trajectories.
//!
//! Everything here is a reduction over immutable trajectory data. The
//! ensemble-level estimators come in two forms: a function over a slice of
//! trajectories, and an accumulator that consumes one trajectory at a time so
//! large ensembles never need to be held in memory. The slice functions are
//! thin wrappers over the accumulators.

mod ams;
mod ergodicity;
mod functional;
mod occupation;
mod report;
mod tightness;

pub use ams::{ams_consistency, AmsConfig, AmsOutcome, CylinderFamily, ShiftedMasses};
pub use ergodicity::{ergodicity_consistency, ErgodicityConfig, ErgodicityOutcome};
pub use functional::{cesaro_sequence, time_average, Functional, TimeAverage, TimeAverageRow};
pub use occupation::{
    occupation_histogram, occupation_l1_deltas, BinSpec, OccupationCounter, OccupationHistogram,
};
pub use report::{StabilityReport, VerdictEntry};
pub use tightness::{tightness_curve, tightness_statistic, TightnessCounter};

use std::fmt;

/// Number of batches used by batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 32;

/// Tri-state outcome of a statistical check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Agreement tolerance `se_multiple * stderr + absolute`.
///
/// `absolute` doubles as the precision floor: a check whose standard errors
/// exceed it cannot pass and reports [`Verdict::Inconclusive`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub se_multiple: f64,
    pub absolute: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            se_multiple: 3.0,
            absolute: 0.01,
        }
    }
}

/// Sample mean with a batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Mean of `samples` and the standard error of the mean estimated from
/// `batches` contiguous batch means. Samples past the last full batch count
/// toward the mean only. With fewer than two samples the error is infinite.
pub fn batch_means(samples: &[f64], batches: usize) -> MeanEstimate {
    let n = samples.len();
    if n == 0 {
        return MeanEstimate {
            mean: f64::NAN,
            stderr: f64::INFINITY,
        };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let batches = batches.min(n);
    if batches < 2 {
        return MeanEstimate {
            mean,
            stderr: f64::INFINITY,
        };
    }
    let size = n / batches;
    let means: Vec<f64> = samples
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    MeanEstimate {
        mean,
        stderr: stderr_of_batch_means(&means),
    }
}

pub(crate) fn stderr_of_batch_means(means: &[f64]) -> f64 {
    let b = means.len();
    if b < 2 {
        return f64::INFINITY;
    }
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

pub(crate) fn check_ensemble(trajs: &[crate::Trajectory]) -> crate::Result<usize> {
    let first = trajs.first().ok_or(crate::Error::EmptyEnsemble)?;
    let len = first.len();
    if let Some(bad) = trajs.iter().find(|t| t.len() != len) {
        return Err(crate::Error::RaggedEnsemble {
            expected: len,
            found: bad.len(),
        });
    }
    Ok(len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_means_of_iid_matches_naive_error() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..64_000).map(|_| rng.random::<f64>()).collect();
        let est = batch_means(&xs, DEFAULT_BATCHES);
        let naive = (1.0 / 12.0 / xs.len() as f64).sqrt();
        assert!((est.mean - 0.5).abs() < 5.0 * naive);
        assert!(est.stderr > 0.5 * naive && est.stderr < 2.0 * naive);
    }

    #[test]
    fn batch_means_edge_cases() {
        assert!(batch_means(&[], 32).mean.is_nan());
        assert!(batch_means(&[1.0], 32).stderr.is_infinite());
        let c = batch_means(&[2.0; 100], 32);
        assert_eq!((c.mean, c.stderr), (2.0, 0.0));
    }

    #[test]
    fn verdict_ordering_puts_fail_last() {
        assert!(Verdict::Fail > Verdict::Inconclusive);
        assert!(Verdict::Inconclusive > Verdict::Pass);
        assert_eq!(Verdict::Inconclusive.to_string(), "inconclusive");
    }
}
