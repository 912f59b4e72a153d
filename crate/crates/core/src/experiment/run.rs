use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, SchemeSection};
use super::plan::{ams_enabled, build_plan, ergodicity_enabled, Plan};
use crate::control_loop::EnsembleMoments;
use crate::diagnostics::{
    ams_consistency, ergodicity_consistency, time_average, AmsConfig, BinSpec, CylinderFamily, ErgodicityConfig,
    OccupationCounter, StabilityReport, TightnessCounter, TimeAverageRow, Tolerance, Verdict,
};
use crate::error::{Error, Result};
use crate::schemes::{check_delta_mod_stability, MIN_PRECHECK_SAMPLES};
use crate::simulation::{derive_seed, ensemble_seeds, for_each_trajectory, seed_for_initial};
use crate::trajectory::Trajectory;

// Sub-stream tags under the master seed. The ensemble uses indices 0..n.
const PRECHECK_STREAM: u64 = 1 << 40;
const AMS_STREAM: u64 = (1 << 40) + 1;
const ERGODIC_STREAM: u64 = (1 << 40) + 2;

/// Report plus the paths of every file written.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub report: StabilityReport,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutput {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code()
    }
}

/// Runs the ensemble and every configured diagnostic, then writes the CSVs and
/// `report.txt` into `cfg.output_dir`.
///
/// Trajectory `i` of the ensemble is seeded with `derive_seed(master_seed, i)`;
/// seeds given inside `source` or `plant` are not used.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let plan = build_plan(cfg)?;
    let d = &cfg.diagnostics;
    let e = &cfg.ensemble;
    let tolerance: Tolerance = d.tolerance.into();
    let m_max = d.m_grid.iter().cloned().fold(f64::MIN, f64::max);

    let mut report = StabilityReport::default();
    report.fact("kind", cfg.kind.name());
    report.fact("master_seed", cfg.master_seed);
    report.fact("ensemble.n_trajs", e.n_trajs);
    report.fact("ensemble.horizon", e.horizon);
    if cfg.source.is_some() {
        report.fact("ensemble.burn_in", e.burn_in);
    }
    for (k, v) in &plan.facts {
        report.fact(k.clone(), v);
    }

    if let SchemeSection::DeltaMod(dm) = &cfg.scheme {
        let source = cfg.source.clone().expect("required").with_seed(derive_seed(cfg.master_seed, PRECHECK_STREAM));
        let pre = check_delta_mod_stability(&source, dm.m, dm.precheck_samples.max(MIN_PRECHECK_SAMPLES))?;
        report.fact("precheck.p_upper", pre.upper.best());
        report.fact("precheck.p_lower", pre.lower.best());
        report.fact("precheck.p_upper_monte_carlo", pre.upper.monte_carlo);
        report.fact("precheck.p_lower_monte_carlo", pre.lower.monte_carlo);
        report.fact("precheck.passes", pre.passes);
    }

    // Ensemble pass: streaming reductions in trajectory order.
    let edges = d.state_edges.clone().unwrap_or_else(|| default_state_edges(m_max));
    let checkpoints = vec![e.horizon / 8, e.horizon / 4, e.horizon / 2];
    let mut occupation = OccupationCounter::new(BinSpec::State(edges), checkpoints)
        .map_err(|err| Error::config("diagnostics.state_edges", err.to_string()))?;
    let mut tightness = TightnessCounter::new(d.m_grid.clone())?;
    let mut moments = match plan.zoom {
        Some(_) => Some(EnsembleMoments::new(2.0, e.horizon)?),
        None => None,
    };
    let mut kept: Vec<Trajectory> = Vec::new();
    let mut final_drift = 0.0;
    let seeds = ensemble_seeds(cfg.master_seed, e.n_trajs);
    for_each_trajectory(plan.system.as_ref(), plan.initial, &seeds, e.horizon, |i, traj| {
        tightness.push(&traj)?;
        occupation.push(&traj)?;
        if let Some(m) = moments.as_mut() {
            m.push(&traj)?;
        }
        final_drift += traj.s[traj.len() - 1] / traj.len() as f64;
        if i < e.write_trajectories {
            kept.push(traj);
        }
        Ok(())
    })?;
    let curve = tightness.curve()?;
    let hist = occupation.histogram()?;
    report.fact("drift.mean_s_T_over_T", final_drift / e.n_trajs as f64);

    let tight_value = tightness.value_at(m_max)?;
    report.verdict(
        "tight",
        if tight_value < d.tight_threshold {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        format!("fraction of states with |s| >= {m_max} is {tight_value}"),
        format!("< {}", d.tight_threshold),
    );
    identity_verdict(&mut report, &curve, &hist);

    if let Some(m) = &moments {
        moment_verdict(&mut report, m, d.plateau_factor, d.growth_factor)?;
    }

    if ams_enabled(cfg) {
        let ams = ams_consistency(
            plan.system.as_ref(),
            &AmsConfig {
                initials: d.initials.clone(),
                shifts: d.shifts.clone(),
                horizon: d.ams_horizon.unwrap_or(e.horizon),
                n_trajs: d.ams_trajs,
                master_seed: derive_seed(cfg.master_seed, AMS_STREAM),
                family: CylinderFamily {
                    window: d.cylinder_window,
                    x_edges: d.cylinder_x_edges.clone(),
                    s_edges: d.cylinder_s_edges.clone().unwrap_or_else(|| vec![-m_max / 4.0, 0.0, m_max / 4.0]),
                },
                tolerance,
                tight_radius: m_max,
                tight_threshold: d.tight_threshold,
            },
        )?;
        report.fact("ams.max_deviation", ams.max_deviation);
        report.verdict("ams_consistent", ams.verdict, ams.reason, tolerance_text(tolerance, "pooled"));
    }

    let ergodic_master = derive_seed(cfg.master_seed, ERGODIC_STREAM);
    let ergodic_horizon = d.ergodic_horizon.unwrap_or(e.horizon);
    if ergodicity_enabled(cfg) {
        let erg = ergodicity_consistency(
            plan.system.as_ref(),
            &ErgodicityConfig {
                initials: d.initials.clone(),
                functionals: cfg.functionals(),
                horizon: ergodic_horizon,
                master_seed: ergodic_master,
                tolerance,
            },
        )?;
        report.time_averages = erg.averages;
        report.verdict(
            "ergodic_consistent",
            erg.verdict,
            erg.reason,
            tolerance_text(tolerance, "batch-means"),
        );
    } else if !d.functionals.is_empty() {
        report.time_averages = plain_time_averages(&plan, cfg, ergodic_master, ergodic_horizon)?;
    }

    report.tightness_curve = curve;
    report.occupation_l1_deltas = occupation.l1_deltas()?;
    report.occupation = Some(hist);

    let files = write_outputs(&cfg.output_dir, &report, moments.as_ref(), &kept)?;
    Ok(ExperimentOutput { report, files })
}

/// Edges at odd multiples of `w/2` with `w = m_max / 20`, spanning `±2 m_max`.
/// Integer radii on that grid fall on bin boundaries.
fn default_state_edges(m_max: f64) -> Vec<f64> {
    let w = m_max / 20.0;
    (-40..40).map(|i| (i as f64 + 0.5) * w).collect()
}

fn tolerance_text(t: Tolerance, kind: &str) -> String {
    format!("{} x {kind} standard error + {} absolute", t.se_multiple, t.absolute)
}

fn identity_verdict(report: &mut StabilityReport, curve: &[(f64, f64)], hist: &crate::diagnostics::OccupationHistogram) {
    const EPS: f64 = 1e-12;
    let mut problems = Vec::new();
    if (hist.total() - 1.0).abs() > EPS {
        problems.push(format!("histogram mass {}", hist.total()));
    }
    if curve.windows(2).any(|w| w[1].1 > w[0].1) {
        problems.push("tightness curve increases".to_string());
    }
    for &(m, v) in curve {
        let (lo, hi) = hist.tail_mass_bounds(m);
        if v < lo - EPS || v > hi + EPS {
            problems.push(format!("tightness({m}) = {v} outside occupation bounds [{lo}, {hi}]"));
        }
    }
    let (verdict, detail) = if problems.is_empty() {
        (
            Verdict::Pass,
            "histogram sums to 1, curve nonincreasing, tightness within occupation tail bounds".to_string(),
        )
    } else {
        (Verdict::Fail, problems.join("; "))
    };
    report.verdict("occupation_identity", verdict, detail, format!("{EPS} absolute, bounds from bin granularity"));
}

fn moment_verdict(report: &mut StabilityReport, m: &EnsembleMoments, plateau: f64, growth: f64) -> Result<()> {
    let curve = m.moment_curve()?;
    let end = curve.len() - 1;
    let mid = end / 2;
    let ratio = curve[end] / curve[mid];
    report.fact("moment.t_mid", mid);
    report.fact("moment.t_end", end);
    report.fact("moment.at_mid", curve[mid]);
    report.fact("moment.at_end", curve[end]);
    report.fact("moment.ratio", ratio);
    report.fact("diverged_trajectories", m.diverged());
    let (verdict, detail) = if m.diverged() > 0 {
        (
            Verdict::Fail,
            format!("{} of {} trajectories hit the divergence guard", m.diverged(), m.count()),
        )
    } else if !ratio.is_finite() || ratio > growth {
        (Verdict::Fail, format!("E[x^2 + delta^2] grew by {ratio} from t = {mid} to t = {end}"))
    } else if ratio <= plateau && ratio >= 1.0 / plateau {
        (Verdict::Pass, format!("E[x^2 + delta^2] ratio {ratio} between t = {mid} and t = {end}"))
    } else {
        (
            Verdict::Inconclusive,
            format!("ratio {ratio} between t = {mid} and t = {end} is neither a plateau nor growth"),
        )
    };
    report.verdict(
        "moment_bounded",
        verdict,
        detail,
        format!("pass within factor {plateau}, fail above {growth} or on divergence"),
    );
    Ok(())
}

/// One trajectory per initial condition (or the ensemble start) when there are
/// too few for the ergodicity check.
fn plain_time_averages(plan: &Plan, cfg: &ExperimentConfig, master: u64, horizon: usize) -> Result<Vec<TimeAverageRow>> {
    let mut initials = cfg.diagnostics.initials.clone();
    if initials.is_empty() {
        initials.push(plan.initial);
    }
    initials.sort_by(f64::total_cmp);
    initials.dedup();
    let functionals = cfg.functionals();
    let mut rows = Vec::new();
    for initial in initials {
        let traj = plan.system.simulate(initial, seed_for_initial(master, initial), horizon)?;
        for f in &functionals {
            let avg = time_average(&traj, f)?;
            rows.push(TimeAverageRow {
                functional: f.name().to_string(),
                initial,
                value: avg.mean,
                stderr: avg.stderr,
            });
        }
    }
    Ok(rows)
}

fn write_outputs(
    dir: &Path,
    report: &StabilityReport,
    moments: Option<&EnsembleMoments>,
    kept: &[Trajectory],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();

    let path = dir.join("tightness_curve.csv");
    write_csv(&path, &["M", "value"], report.tightness_curve.iter().map(|(m, v)| vec![m.to_string(), v.to_string()]))?;
    files.push(path);

    let path = dir.join("time_averages.csv");
    write_csv(
        &path,
        &["functional", "initial", "value", "stderr"],
        report.time_averages.iter().map(|r| {
            vec![
                r.functional.clone(),
                r.initial.to_string(),
                r.value.to_string(),
                r.stderr.to_string(),
            ]
        }),
    )?;
    files.push(path);

    if let Some(hist) = &report.occupation {
        let path = dir.join("occupation.csv");
        write_csv(
            &path,
            &["bin_lo", "bin_hi", "mass"],
            hist.s_bins()
                .into_iter()
                .zip(hist.s_marginal())
                .map(|((lo, hi), m)| vec![lo.to_string(), hi.to_string(), m.to_string()]),
        )?;
        files.push(path);
    }

    if let Some(m) = moments {
        let (x2, d2, of) = (m.mean_sq_x()?, m.mean_sq_delta()?, m.frac_overflow()?);
        let path = dir.join("ensemble.csv");
        write_csv(
            &path,
            &["t", "mean_sq_x", "mean_sq_delta", "frac_overflow"],
            (0..x2.len()).map(|t| vec![t.to_string(), x2[t].to_string(), d2[t].to_string(), of[t].to_string()]),
        )?;
        files.push(path);
    }

    for (i, traj) in kept.iter().enumerate() {
        let path = dir.join(format!("trajectory_{i}.csv"));
        match &traj.control {
            Some(rec) => write_csv(
                &path,
                &["t", "x", "delta", "xhat", "u", "overflow_flag"],
                (0..traj.len()).map(|t| {
                    vec![
                        t.to_string(),
                        traj.x[t].to_string(),
                        traj.s[t].to_string(),
                        rec.xhat[t].to_string(),
                        rec.u[t].to_string(),
                        (rec.overflow[t] as u8).to_string(),
                    ]
                }),
            )?,
            None => write_csv(
                &path,
                &["t", "x", "s"],
                (0..traj.len()).map(|t| vec![t.to_string(), traj.x[t].to_string(), traj.s[t].to_string()]),
            )?,
        }
        files.push(path);
    }

    let path = dir.join("report.txt");
    fs::write(&path, report.to_key_value()).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    Ok(files)
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let io = |err: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: err.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
