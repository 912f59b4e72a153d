use super::{time_average, Functional, TimeAverageRow, Tolerance, Verdict};
use crate::error::{Error, Result};
use crate::simulation::{seed_for_initial, System};

#[derive(Clone, Debug)]
pub struct ErgodicityConfig {
    pub initials: Vec<f64>,
    pub functionals: Vec<Functional>,
    pub horizon: usize,
    pub master_seed: u64,
    pub tolerance: Tolerance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicityOutcome {
    pub verdict: Verdict,
    pub reason: String,
    pub averages: Vec<TimeAverageRow>,
}

/// Runs one long trajectory per initial condition and checks that the
/// sample-path averages of every functional agree.
///
/// Averages `a_i, a_j` with batch-means errors `e_i, e_j` agree when
/// `|a_i - a_j| ≤ se_multiple * sqrt(e_i² + e_j²) + absolute * bound`. Each
/// initial condition's seed depends on its value only, so the verdict does
/// not depend on the order of `initials`.
pub fn ergodicity_consistency<Y: System + ?Sized>(system: &Y, cfg: &ErgodicityConfig) -> Result<ErgodicityOutcome> {
    let mut distinct = cfg.initials.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::invalid("initials", "need at least three distinct initial conditions"));
    }
    if cfg.functionals.len() < 3 {
        return Err(Error::invalid("functionals", "need at least three bounded functionals"));
    }
    if cfg.horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }

    let mut averages = Vec::with_capacity(distinct.len() * cfg.functionals.len());
    for &initial in &distinct {
        let traj = system.simulate(initial, seed_for_initial(cfg.master_seed, initial), cfg.horizon)?;
        for f in &cfg.functionals {
            let avg = time_average(&traj, f)?;
            averages.push(TimeAverageRow {
                functional: f.name().to_string(),
                initial,
                value: avg.mean,
                stderr: avg.stderr,
            });
        }
    }

    let tol = cfg.tolerance;
    let mut worst: Option<(f64, String)> = None;
    let mut imprecise: Option<(f64, String)> = None;
    for f in &cfg.functionals {
        let rows: Vec<&TimeAverageRow> = averages.iter().filter(|r| r.functional == f.name()).collect();
        let floor = tol.absolute * f.bound();
        for (i, a) in rows.iter().enumerate() {
            if a.stderr > floor && imprecise.as_ref().is_none_or(|(se, _)| a.stderr > *se) {
                imprecise = Some((a.stderr, f.name().to_string()));
            }
            for b in &rows[i + 1..] {
                let allowed = tol.se_multiple * a.stderr.hypot(b.stderr) + floor;
                let excess = (a.value - b.value).abs() - allowed;
                if excess > 0.0 && worst.as_ref().is_none_or(|(w, _)| excess > *w) {
                    worst = Some((
                        excess,
                        format!(
                            "`{}` averages {:.4} (s0={}) and {:.4} (s0={}) differ beyond tolerance",
                            f.name(),
                            a.value,
                            a.initial,
                            b.value,
                            b.initial
                        ),
                    ));
                }
            }
        }
    }
    let (verdict, reason) = match (worst, imprecise) {
        (Some((_, msg)), _) => (Verdict::Fail, msg),
        (None, Some((se, name))) => (
            Verdict::Inconclusive,
            format!("standard error {se:.4} of `{name}` exceeds the precision floor"),
        ),
        (None, None) => (
            Verdict::Pass,
            format!(
                "{} functionals agree across {} initial conditions",
                cfg.functionals.len(),
                distinct.len()
            ),
        ),
    };
    Ok(ErgodicityOutcome {
        verdict,
        reason,
        averages,
    })
}
