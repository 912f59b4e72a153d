use super::occupation::bin_of;
use super::{stderr_of_batch_means, Tolerance, Verdict, DEFAULT_BATCHES};
use crate::diagnostics::TightnessCounter;
use crate::error::{Error, Result};
use crate::simulation::{derive_seed, for_each_trajectory, seed_for_initial, System};
use crate::trajectory::Trajectory;

/// Finite family of cylinder events on `(x_k, .., x_{k+w-1}, s_k)`.
///
/// Each input coordinate is binned by `x_edges` and the state by `s_edges`
/// (tails included), giving `(|x_edges|+1)^w (|s_edges|+1)` disjoint events.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderFamily {
    pub window: usize,
    pub x_edges: Vec<f64>,
    pub s_edges: Vec<f64>,
}

impl CylinderFamily {
    pub const DEFAULT_WINDOW: usize = 3;

    fn validate(&self) -> Result<()> {
        let ok = |e: &[f64]| e.iter().all(|v| v.is_finite()) && e.windows(2).all(|w| w[0] < w[1]);
        if self.window == 0 || !ok(&self.x_edges) || !ok(&self.s_edges) {
            return Err(Error::BadEdges);
        }
        if self.n_events() > 1 << 16 {
            return Err(Error::invalid("cylinder", "too many events; use fewer edges or a shorter window"));
        }
        Ok(())
    }

    pub fn n_events(&self) -> usize {
        (self.x_edges.len() + 1).pow(self.window as u32) * (self.s_edges.len() + 1)
    }

    #[inline]
    fn event(&self, xs: &[f64], s: f64) -> usize {
        let nx = self.x_edges.len() + 1;
        let code = xs.iter().fold(0, |acc, &x| acc * nx + bin_of(&self.x_edges, x));
        code * (self.s_edges.len() + 1) + bin_of(&self.s_edges, s)
    }
}

#[derive(Clone, Debug)]
pub struct AmsConfig {
    pub initials: Vec<f64>,
    pub shifts: Vec<usize>,
    /// Length `T` of each Cesàro window.
    pub horizon: usize,
    pub n_trajs: usize,
    pub master_seed: u64,
    pub family: CylinderFamily,
    pub tolerance: Tolerance,
    /// Tightness precondition: the mass outside `|s| < tight_radius` must stay
    /// below `tight_threshold`.
    pub tight_radius: f64,
    pub tight_threshold: f64,
}

/// Cesàro-averaged masses of the `shift`-shifted process from one initial.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedMasses {
    pub initial: f64,
    pub shift: usize,
    pub mass: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmsOutcome {
    pub verdict: Verdict,
    pub reason: String,
    pub tight: bool,
    pub tightness: f64,
    pub max_deviation: f64,
    pub groups: Vec<ShiftedMasses>,
}

/// Checks that Cesàro averages of shifted cylinder-event probabilities agree
/// across shifts and initial conditions.
///
/// For each initial `s_0` and shift `n`, the mass of event `F` is
/// `(1/(T n_trajs)) Σ_traj Σ_{k=n}^{n+T-1} 1{(x_{k..k+w-1}, s_k) ∈ F}` with a
/// batch-means standard error over the `T` time points. The check passes when
/// every group lies within `se_multiple * pooled_se + absolute` of the
/// cross-group mean for every event. A non-tight run is reported as
/// inconclusive with `tight = false`.
pub fn ams_consistency<Y: System + ?Sized>(system: &Y, cfg: &AmsConfig) -> Result<AmsOutcome> {
    if cfg.initials.len() < 2 {
        return Err(Error::invalid("initials", "need at least two initial conditions"));
    }
    if cfg.shifts.len() < 2 {
        return Err(Error::invalid("shifts", "need at least two shifts"));
    }
    if cfg.horizon < DEFAULT_BATCHES || cfg.n_trajs == 0 {
        return Err(Error::invalid("horizon", format!("need T >= {DEFAULT_BATCHES} and n_trajs >= 1")));
    }
    cfg.family.validate()?;

    let max_shift = *cfg.shifts.iter().max().expect("nonempty");
    let len = max_shift + cfg.horizon + cfg.family.window - 1;
    let n_events = cfg.family.n_events();
    let batch = cfg.horizon / DEFAULT_BATCHES;

    let mut tightness = TightnessCounter::new(vec![cfg.tight_radius])?;
    let mut groups = Vec::new();
    for &initial in &cfg.initials {
        let base = seed_for_initial(cfg.master_seed, initial);
        let seeds: Vec<u64> = (0..cfg.n_trajs as u64).map(|i| derive_seed(base, i)).collect();
        // [shift][event] totals and [shift][batch][event] batch totals
        let mut totals = vec![vec![0u64; n_events]; cfg.shifts.len()];
        let mut batches = vec![vec![vec![0u64; n_events]; DEFAULT_BATCHES]; cfg.shifts.len()];
        for_each_trajectory(system, initial, &seeds, len, |_, traj| {
            tightness.push(&traj)?;
            let events = event_codes(&cfg.family, &traj, max_shift + cfg.horizon);
            for (si, &shift) in cfg.shifts.iter().enumerate() {
                for (j, &e) in events[shift..shift + cfg.horizon].iter().enumerate() {
                    totals[si][e] += 1;
                    let b = j / batch;
                    if b < DEFAULT_BATCHES {
                        batches[si][b][e] += 1;
                    }
                }
            }
            Ok(())
        })?;
        for (si, &shift) in cfg.shifts.iter().enumerate() {
            let denom = (cfg.horizon * cfg.n_trajs) as f64;
            let batch_denom = (batch * cfg.n_trajs) as f64;
            let mass = totals[si].iter().map(|&c| c as f64 / denom).collect();
            let stderr = (0..n_events)
                .map(|e| {
                    let means: Vec<f64> = batches[si].iter().map(|b| b[e] as f64 / batch_denom).collect();
                    stderr_of_batch_means(&means)
                })
                .collect();
            groups.push(ShiftedMasses {
                initial,
                shift,
                mass,
                stderr,
            });
        }
    }

    let tight_value = tightness.curve()?[0].1;
    let tight = tight_value < cfg.tight_threshold;
    let (max_deviation, worst_event, any_fail, max_se) = compare(&groups, n_events, cfg.tolerance);

    let (verdict, reason) = if !tight {
        (
            Verdict::Inconclusive,
            format!(
                "precondition failed: not tight (mass outside |s| < {} is {tight_value:.4} >= {})",
                cfg.tight_radius, cfg.tight_threshold
            ),
        )
    } else if any_fail {
        (
            Verdict::Fail,
            format!("shifted masses disagree: max deviation {max_deviation:.4} at event {worst_event}"),
        )
    } else if max_se > cfg.tolerance.absolute {
        (
            Verdict::Inconclusive,
            format!("standard error {max_se:.4} exceeds the floor {}", cfg.tolerance.absolute),
        )
    } else {
        (
            Verdict::Pass,
            format!("max deviation {max_deviation:.4} across {} groups", groups.len()),
        )
    };
    Ok(AmsOutcome {
        verdict,
        reason,
        tight,
        tightness: tight_value,
        max_deviation,
        groups,
    })
}

fn event_codes(family: &CylinderFamily, traj: &Trajectory, n: usize) -> Vec<usize> {
    (0..n)
        .map(|k| family.event(&traj.x[k..k + family.window], traj.s[k]))
        .collect()
}

/// Returns (max deviation, its event, whether any event failed, max stderr).
fn compare(groups: &[ShiftedMasses], n_events: usize, tol: Tolerance) -> (f64, usize, bool, f64) {
    let g = groups.len() as f64;
    let mut max_dev = 0.0;
    let mut worst = 0;
    let mut fail = false;
    let mut max_se: f64 = 0.0;
    for e in 0..n_events {
        let mean = groups.iter().map(|gr| gr.mass[e]).sum::<f64>() / g;
        let pooled = (groups.iter().map(|gr| gr.stderr[e].powi(2)).sum::<f64>() / g).sqrt();
        let allowed = tol.se_multiple * pooled + tol.absolute;
        for gr in groups {
            let dev = (gr.mass[e] - mean).abs();
            if dev > max_dev {
                max_dev = dev;
                worst = e;
            }
            fail |= dev > allowed;
            max_se = max_se.max(gr.stderr[e]);
        }
    }
    (max_dev, worst, fail, max_se)
}
