use std::fmt::Write as _;

use super::config::{ExperimentConfig, SchemeSection};
use crate::control_loop::ClosedLoop;
use crate::error::{Error, Result};
use crate::schemes::{
    required_rate_with_epsilon, DeltaMod, GGPolicy, GoodmanGersho, LinearScheme, StepLattice, ZoomParams,
};
use crate::simulation::{Driven, System};
use crate::sources::validate_spec;

/// A validated, ready-to-run experiment.
pub(crate) struct Plan {
    pub system: Box<dyn System>,
    /// Ensemble starting point: `s_0` for driven schemes, `x_0` for the loop.
    pub initial: f64,
    pub zoom: Option<ZoomParams>,
    /// Resolved parameters and derived quantities, in display order.
    pub facts: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl Plan {
    fn fact(&mut self, key: &str, value: impl ToString) {
        self.facts.push((key.to_string(), value.to_string()));
    }
}

/// Validates every parameter through its owning module and builds the system.
pub(crate) fn build_plan(cfg: &ExperimentConfig) -> Result<Plan> {
    let source = match &cfg.source {
        Some(spec) => Some(validate_spec(spec.clone()).map_err(|e| Error::config("source", e.to_string()))?),
        None => None,
    };
    let burn_in = cfg.ensemble.burn_in;
    let mut plan = match &cfg.scheme {
        SchemeSection::DeltaMod(d) => {
            let scheme = DeltaMod::new(d.m).map_err(|e| Error::config("delta_mod.m", e.to_string()))?;
            let mut plan = Plan {
                system: Box::new(Driven::new(scheme, source.clone().expect("required"), burn_in)),
                initial: d.s0,
                zoom: None,
                facts: Vec::new(),
                warnings: Vec::new(),
            };
            plan.fact("delta_mod.m", d.m);
            plan.fact("delta_mod.s0", d.s0);
            plan
        }
        SchemeSection::GoodmanGersho(g) => {
            let policy = GGPolicy::new(g.thresholds.clone(), g.log_steps.clone(), g.require_coprime)
                .map_err(|e| Error::config("goodman_gersho", e.to_string()))?;
            let lattice = StepLattice::anchored_at(g.delta0, g.m_lattice)
                .map_err(|e| Error::config("goodman_gersho.delta0", e.to_string()))?;
            let gcd = policy.steps_gcd();
            let coprime = policy.is_coprime();
            let scheme = GoodmanGersho::new(policy, lattice, g.output_levels)
                .map_err(|e| Error::config("goodman_gersho.output_levels", e.to_string()))?;
            let mut plan = Plan {
                system: Box::new(Driven::new(scheme, source.clone().expect("required"), burn_in)),
                initial: g.delta0.log2(),
                zoom: None,
                facts: Vec::new(),
                warnings: Vec::new(),
            };
            plan.fact("goodman_gersho.thresholds", format!("{:?}", g.thresholds));
            plan.fact("goodman_gersho.output_levels", g.output_levels);
            plan.fact("goodman_gersho.delta0", g.delta0);
            plan.fact("lattice.spacing", g.m_lattice);
            plan.fact("lattice.steps", format!("{:?}", g.log_steps));
            plan.fact("lattice.gcd", gcd);
            plan.fact("lattice.coprime", coprime);
            if !coprime {
                plan.warnings.push(format!(
                    "log-step gcd = {gcd}: only lattice indices divisible by {gcd} are reachable from delta0"
                ));
            }
            plan
        }
        SchemeSection::Custom(c) => {
            let scheme = LinearScheme {
                gain: c.gain,
                input_gain: c.input_gain,
                offset: c.offset,
            };
            if ![c.gain, c.input_gain, c.offset, c.s0].iter().all(|v| v.is_finite()) {
                return Err(Error::config("custom_scheme", "coefficients must be finite"));
            }
            let mut plan = Plan {
                system: Box::new(Driven::new(scheme, source.clone().expect("required"), burn_in)),
                initial: c.s0,
                zoom: None,
                facts: Vec::new(),
                warnings: Vec::new(),
            };
            plan.fact("custom_scheme.gain", c.gain);
            plan.fact("custom_scheme.input_gain", c.input_gain);
            plan.fact("custom_scheme.offset", c.offset);
            plan.fact("custom_scheme.s0", c.s0);
            plan
        }
        SchemeSection::Zoom { zoom, plant } => {
            plant.validate().map_err(|e| Error::config("plant", e.to_string()))?;
            let rate = required_rate_with_epsilon(plant.a, zoom.epsilon)
                .map_err(|e| Error::config("plant.a", e.to_string()))?;
            let levels = zoom.levels.unwrap_or(rate.k_policy);
            let params = ZoomParams::new(
                plant.a,
                plant.b,
                levels,
                zoom.expansion,
                zoom.contraction,
                zoom.floor,
                zoom.delta0.unwrap_or(zoom.floor),
                zoom.m_lattice,
                zoom.require_coprime,
            )
            .map_err(|e| Error::config("zoom_control", e.to_string()))?;
            let system = ClosedLoop::new(plant.clone(), params.clone()).map_err(|e| Error::config("plant", e.to_string()))?;
            let r = params.rate();
            let ceil = plant.a.abs().ceil();
            let mut plan = Plan {
                system: Box::new(system),
                initial: plant.x0,
                zoom: Some(params.clone()),
                facts: Vec::new(),
                warnings: Vec::new(),
            };
            plan.fact("plant.a", plant.a);
            plan.fact("plant.b", plant.b);
            plan.fact("plant.noise_std", plant.noise_std);
            plan.fact("plant.noise_moment_exponent", plant.noise_moment_exponent);
            plan.fact("plant.x0", plant.x0);
            plan.fact(
                "K",
                if zoom.levels.is_some() {
                    format!("{levels} (configured)")
                } else {
                    format!("{levels} (ceil(|a| + {}))", zoom.epsilon)
                },
            );
            plan.fact("K_min", rate.k_min);
            plan.fact("R", format!("log2({}) = {r}", levels + 1));
            plan.fact("R_threshold", format!("log2({ceil_p1}) = {}", rate.threshold, ceil_p1 = ceil + 1.0));
            plan.fact("rate_condition", if r > rate.threshold { "satisfied" } else { "violated" });
            let (e, c) = (params.expansion(), params.contraction());
            plan.fact(
                "zoom.expansion",
                format!("requested {} realized {} (2^({} * {}))", e.requested, e.realized, e.exponent, zoom.m_lattice),
            );
            plan.fact(
                "zoom.contraction",
                format!("requested {} realized {} (2^({} * {}))", c.requested, c.realized, c.exponent, zoom.m_lattice),
            );
            plan.fact("zoom.floor", zoom.floor);
            plan.fact("zoom.delta0", zoom.delta0.unwrap_or(zoom.floor));
            plan.fact("lattice.spacing", zoom.m_lattice);
            plan.fact("lattice.steps", format!("{:?}", params.exponents()));
            plan.fact("lattice.gcd", crate::schemes::steps_gcd(&params.exponents()));
            plan.fact("lattice.coprime", params.is_coprime());
            if r <= rate.threshold {
                plan.warnings.push(format!(
                    "rate R = {r} does not exceed R_threshold = {}; the loop is not expected to stabilize",
                    rate.threshold
                ));
            }
            if !params.is_coprime() {
                plan.warnings.push(format!(
                    "zoom exponents {:?} share a factor; step sizes reach a sublattice only",
                    params.exponents()
                ));
            }
            plan
        }
    };
    if let Some(spec) = &cfg.source {
        let mut facts = vec![
            ("source.kind".to_string(), format!("{:?}", spec.kind).to_lowercase()),
            ("source.noise_std".to_string(), spec.noise_std.to_string()),
            ("source.mean_shift".to_string(), spec.mean_shift.to_string()),
        ];
        if !spec.coefficients.is_empty() {
            facts.push(("source.coefficients".to_string(), format!("{:?}", spec.coefficients)));
        }
        plan.facts.splice(0..0, facts);
    }
    Ok(plan)
}

/// Names of the diagnostics a config will run.
pub(crate) fn planned_diagnostics(cfg: &ExperimentConfig) -> Vec<String> {
    let d = &cfg.diagnostics;
    let m_max = d.m_grid.iter().cloned().fold(f64::MIN, f64::max);
    let mut out = vec![
        format!("tight (M_max = {m_max}, threshold {})", d.tight_threshold),
        "occupation_identity".to_string(),
    ];
    if matches!(cfg.scheme, SchemeSection::Zoom { .. }) {
        out.push(format!(
            "moment_bounded (plateau factor {}, growth factor {})",
            d.plateau_factor, d.growth_factor
        ));
    }
    if matches!(cfg.scheme, SchemeSection::DeltaMod(_)) {
        out.push("precheck (recorded, not a verdict)".to_string());
    }
    if ams_enabled(cfg) {
        out.push(format!("ams_consistent (initials {:?}, shifts {:?})", d.initials, d.shifts));
    }
    if ergodicity_enabled(cfg) {
        out.push(format!("ergodic_consistent (initials {:?}, functionals {:?})", d.initials, d.functionals));
    } else if !d.functionals.is_empty() {
        out.push(format!("time averages of {:?}", d.functionals));
    }
    out
}

pub(crate) fn ams_enabled(cfg: &ExperimentConfig) -> bool {
    distinct(&cfg.diagnostics.initials) >= 2 && cfg.diagnostics.shifts.len() >= 2
}

pub(crate) fn ergodicity_enabled(cfg: &ExperimentConfig) -> bool {
    distinct(&cfg.diagnostics.initials) >= 3 && cfg.diagnostics.functionals.len() >= 3
}

fn distinct(values: &[f64]) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Resolved parameters, derived quantities and the diagnostics to be run,
/// without simulating anything.
pub fn describe(cfg: &ExperimentConfig) -> Result<String> {
    let plan = build_plan(cfg)?;
    let mut out = String::new();
    let _ = writeln!(out, "kind = {}", cfg.kind.name());
    let _ = writeln!(out, "master_seed = {}", cfg.master_seed);
    let _ = writeln!(out, "output_dir = {}", cfg.output_dir.display());
    let e = &cfg.ensemble;
    let _ = writeln!(out, "ensemble.n_trajs = {}", e.n_trajs);
    let _ = writeln!(out, "ensemble.horizon = {}", e.horizon);
    if cfg.source.is_some() {
        let _ = writeln!(out, "ensemble.burn_in = {}", e.burn_in);
    }
    for (k, v) in &plan.facts {
        let _ = writeln!(out, "{k} = {v}");
    }
    for d in planned_diagnostics(cfg) {
        let _ = writeln!(out, "diagnostic: {d}");
    }
    for w in &plan.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zoom_cfg(levels: &str) -> ExperimentConfig {
        let text = format!(
            r#"
            kind = "zoom_control"
            [plant]
            a = 2.0
            b = 1.0
            noise_std = 1.0
            [zoom_control]
            {levels}
            expansion = 4.0
            contraction = 0.5
            floor = 1.0
        "#
        );
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn zoom_description_reports_rate() {
        let text = describe(&zoom_cfg("")).unwrap();
        assert!(text.contains("R_threshold = log2(3) = 1.584962500721156\n"), "{text}");
        assert!(text.contains("K = 3 (ceil(|a| + 0.01))\n"), "{text}");
        assert!(text.contains("R = log2(4) = 2\n"));
        assert!(text.contains("rate_condition = satisfied\n"));
        assert!(text.contains("lattice.steps = [2, -1]\n"));
        assert!(!text.contains("warning"));

        let low = describe(&zoom_cfg("levels = 2")).unwrap();
        assert!(low.contains("K = 2 (configured)\n"));
        assert!(low.contains("rate_condition = violated\n"));
        assert!(low.contains("warning: rate R"));
    }

    #[test]
    fn gg_description_warns_on_shared_factor() {
        let text = r#"
            kind = "goodman_gersho"
            [source]
            kind = "iid"
            noise_std = 1.0
            [goodman_gersho]
            thresholds = [1.0]
            log_steps = [-2, 2]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let out = describe(&cfg).unwrap();
        assert!(out.contains("lattice.gcd = 2\n"), "{out}");
        assert!(out.contains("warning: log-step gcd = 2"), "{out}");
    }

    #[test]
    fn invalid_module_parameters_surface_as_config_errors() {
        let text = r#"
            kind = "delta_mod"
            [source]
            kind = "ar"
            coefficients = [1.0]
            noise_std = 1.0
            [delta_mod]
            m = 1.0
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        match describe(&cfg) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "source"),
            other => panic!("{other:?}"),
        }
    }
}
