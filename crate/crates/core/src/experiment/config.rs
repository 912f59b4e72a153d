use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::control_loop::PlantSpec;
use crate::diagnostics::{Functional, Tolerance};
use crate::error::{Error, Result};
use crate::schemes::LogSpacing;
use crate::sources::{SourceSpec, DEFAULT_BURN_IN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    DeltaMod,
    GoodmanGersho,
    ZoomControl,
    CustomScheme,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::DeltaMod => "delta_mod",
            ExperimentKind::GoodmanGersho => "goodman_gersho",
            ExperimentKind::ZoomControl => "zoom_control",
            ExperimentKind::CustomScheme => "custom_scheme",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaModSection {
    pub m: f64,
    #[serde(default)]
    pub s0: f64,
    /// Samples used by the tail-probability precheck.
    #[serde(default = "default_precheck_samples")]
    pub precheck_samples: usize,
}

fn default_precheck_samples() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodmanGershoSection {
    pub thresholds: Vec<f64>,
    pub log_steps: Vec<i64>,
    #[serde(default = "one_spacing")]
    pub m_lattice: LogSpacing,
    #[serde(default = "unit")]
    pub delta0: f64,
    #[serde(default = "default_output_levels")]
    pub output_levels: u32,
    #[serde(default)]
    pub require_coprime: bool,
}

fn one_spacing() -> LogSpacing {
    LogSpacing::ONE
}

fn unit() -> f64 {
    1.0
}

fn default_output_levels() -> u32 {
    4
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSchemeSection {
    pub gain: f64,
    #[serde(default)]
    pub input_gain: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub s0: f64,
}

/// Zoom quantizer parameters. `levels` defaults to `ceil(|a| + epsilon)`,
/// `delta0` to `floor`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoomSection {
    #[serde(default)]
    pub levels: Option<u32>,
    pub expansion: f64,
    pub contraction: f64,
    pub floor: f64,
    #[serde(default)]
    pub delta0: Option<f64>,
    #[serde(default = "one_spacing")]
    pub m_lattice: LogSpacing,
    #[serde(default = "yes")]
    pub require_coprime: bool,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn yes() -> bool {
    true
}

fn default_epsilon() -> f64 {
    crate::schemes::DEFAULT_RATE_EPSILON
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_trajs")]
    pub n_trajs: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Number of leading trajectories written as per-trajectory CSVs.
    #[serde(default = "default_write")]
    pub write_trajectories: usize,
}

fn default_trajs() -> usize {
    256
}

fn default_horizon() -> usize {
    100_000
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_write() -> usize {
    1
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            n_trajs: default_trajs(),
            horizon: default_horizon(),
            burn_in: default_burn_in(),
            write_trajectories: default_write(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    #[serde(default = "three")]
    pub se_multiple: f64,
    #[serde(default = "hundredth")]
    pub absolute: f64,
}

fn three() -> f64 {
    3.0
}

fn hundredth() -> f64 {
    0.01
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection {
            se_multiple: three(),
            absolute: hundredth(),
        }
    }
}

impl From<ToleranceSection> for Tolerance {
    fn from(t: ToleranceSection) -> Self {
        Tolerance {
            se_multiple: t.se_multiple,
            absolute: t.absolute,
        }
    }
}

/// Which diagnostics to run and with what parameters. Empty `initials`,
/// `shifts` or `functionals` disable the checks that need them.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "default_m_grid", rename = "M_grid")]
    pub m_grid: Vec<f64>,
    #[serde(default = "default_tight_threshold")]
    pub tight_threshold: f64,
    #[serde(default)]
    pub functionals: Vec<String>,
    #[serde(default)]
    pub initials: Vec<f64>,
    #[serde(default)]
    pub shifts: Vec<usize>,
    #[serde(default)]
    pub tolerance: ToleranceSection,
    /// State-coordinate edges of the occupation histogram.
    #[serde(default)]
    pub state_edges: Option<Vec<f64>>,
    #[serde(default)]
    pub ams_horizon: Option<usize>,
    #[serde(default = "default_ams_trajs")]
    pub ams_trajs: usize,
    #[serde(default = "default_window")]
    pub cylinder_window: usize,
    #[serde(default = "default_cyl_x")]
    pub cylinder_x_edges: Vec<f64>,
    #[serde(default)]
    pub cylinder_s_edges: Option<Vec<f64>>,
    #[serde(default)]
    pub ergodic_horizon: Option<usize>,
    /// Zoom control: the moment curve plateaus when the end value is within
    /// this factor of the midpoint value.
    #[serde(default = "two")]
    pub plateau_factor: f64,
    /// Zoom control: growth beyond this factor is a failure.
    #[serde(default = "ten")]
    pub growth_factor: f64,
}

fn default_m_grid() -> Vec<f64> {
    vec![1.0, 2.0, 5.0, 10.0, 20.0]
}

fn default_tight_threshold() -> f64 {
    0.05
}

fn default_ams_trajs() -> usize {
    32
}

fn default_window() -> usize {
    crate::diagnostics::CylinderFamily::DEFAULT_WINDOW
}

fn default_cyl_x() -> Vec<f64> {
    vec![0.0]
}

fn two() -> f64 {
    2.0
}

fn ten() -> f64 {
    10.0
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            m_grid: default_m_grid(),
            tight_threshold: default_tight_threshold(),
            functionals: Vec::new(),
            initials: Vec::new(),
            shifts: Vec::new(),
            tolerance: ToleranceSection::default(),
            state_edges: None,
            ams_horizon: None,
            ams_trajs: default_ams_trajs(),
            cylinder_window: default_window(),
            cylinder_x_edges: default_cyl_x(),
            cylinder_s_edges: None,
            ergodic_horizon: None,
            plateau_factor: two(),
            growth_factor: ten(),
        }
    }
}

/// Scheme-specific parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum SchemeSection {
    DeltaMod(DeltaModSection),
    GoodmanGersho(GoodmanGershoSection),
    Custom(CustomSchemeSection),
    Zoom { zoom: ZoomSection, plant: PlantSpec },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Absent for zoom control, whose noise is part of the plant.
    pub source: Option<SourceSpec>,
    pub scheme: SchemeSection,
    pub ensemble: EnsembleSection,
    pub diagnostics: DiagnosticsSection,
    pub output_dir: PathBuf,
    pub master_seed: u64,
}

const TOP_LEVEL: &[&str] = &[
    "kind",
    "master_seed",
    "output_dir",
    "source",
    "delta_mod",
    "goodman_gersho",
    "custom_scheme",
    "zoom_control",
    "plant",
    "ensemble",
    "diagnostics",
];

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        if let Some(unknown) = table.keys().find(|k| !TOP_LEVEL.contains(&k.as_str())) {
            return Err(Error::config(unknown.clone(), "unknown field"));
        }
        let kind: ExperimentKind = required(&table, "kind")?;
        let scheme = match kind {
            ExperimentKind::DeltaMod => SchemeSection::DeltaMod(required(&table, "delta_mod")?),
            ExperimentKind::GoodmanGersho => SchemeSection::GoodmanGersho(required(&table, "goodman_gersho")?),
            ExperimentKind::CustomScheme => SchemeSection::Custom(required(&table, "custom_scheme")?),
            ExperimentKind::ZoomControl => SchemeSection::Zoom {
                zoom: required(&table, "zoom_control")?,
                plant: required(&table, "plant")?,
            },
        };
        let source = match kind {
            ExperimentKind::ZoomControl => optional::<SourceSpec>(&table, "source")?,
            _ => Some(required(&table, "source")?),
        };
        let cfg = ExperimentConfig {
            kind,
            source,
            scheme,
            ensemble: optional(&table, "ensemble")?.unwrap_or_default(),
            diagnostics: optional(&table, "diagnostics")?.unwrap_or_default(),
            output_dir: optional::<PathBuf>(&table, "output_dir")?.unwrap_or_else(|| PathBuf::from("out")),
            master_seed: optional(&table, "master_seed")?.unwrap_or(0),
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ExperimentConfig::from_toml_str(&text)
    }

    /// Parameter checks that do not belong to a specific module.
    fn check(&self) -> Result<()> {
        let e = &self.ensemble;
        if e.n_trajs == 0 {
            return Err(Error::config("ensemble.n_trajs", "must be at least 1"));
        }
        if e.horizon < 2 {
            return Err(Error::config("ensemble.horizon", "must be at least 2"));
        }
        let d = &self.diagnostics;
        if d.m_grid.is_empty() || d.m_grid.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::config("diagnostics.M_grid", "radii must be positive"));
        }
        if !(d.tight_threshold > 0.0 && d.tight_threshold <= 1.0) {
            return Err(Error::config("diagnostics.tight_threshold", "must lie in (0, 1]"));
        }
        for (i, id) in d.functionals.iter().enumerate() {
            Functional::parse(id).map_err(|err| Error::config(format!("diagnostics.functionals[{i}]"), err.to_string()))?;
        }
        if !(d.plateau_factor > 1.0) || !(d.growth_factor > 1.0) {
            return Err(Error::config("diagnostics.plateau_factor", "factors must exceed 1"));
        }
        Ok(())
    }

    pub fn functionals(&self) -> Vec<Functional> {
        self.diagnostics
            .functionals
            .iter()
            .map(|id| Functional::parse(id).expect("checked at load"))
            .collect()
    }
}

fn section<T: DeserializeOwned>(table: &toml::Table, key: &str) -> Result<Option<T>> {
    match table.get(key) {
        None => Ok(None),
        Some(value) => T::deserialize(value.clone()).map(Some).map_err(|e| {
            let msg = e.message().to_string();
            let path = match msg.split('`').nth(1) {
                Some(field) if msg.starts_with("missing field") || msg.starts_with("unknown field") => {
                    format!("{key}.{field}")
                }
                _ => key.to_string(),
            };
            Error::config(path, msg)
        }),
    }
}

fn required<T: DeserializeOwned>(table: &toml::Table, key: &str) -> Result<T> {
    section(table, key)?.ok_or_else(|| Error::config(key, "missing required field"))
}

fn optional<T: DeserializeOwned>(table: &toml::Table, key: &str) -> Result<Option<T>> {
    section(table, key)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        kind = "delta_mod"
        master_seed = 7
        [source]
        kind = "iid"
        noise_std = 1.0
        [delta_mod]
        m = 1.0
    "#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::DeltaMod);
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.ensemble, EnsembleSection::default());
        assert_eq!(cfg.ensemble.n_trajs, 256);
        assert_eq!(cfg.ensemble.horizon, 100_000);
        assert_eq!(cfg.diagnostics.tolerance.absolute, 0.01);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn empty_config_names_kind() {
        match ExperimentConfig::from_toml_str("") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "kind"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_nested_field_has_a_path() {
        let text = "kind = \"delta_mod\"\n[source]\nkind = \"iid\"\n[delta_mod]\nm = 1.0\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "source.noise_std"),
            other => panic!("{other:?}"),
        }
        let text = "kind = \"delta_mod\"\n[source]\nkind = \"iid\"\nnoise_std = 1.0\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "delta_mod"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = format!("{MINIMAL}\n[ensemble]\nn_traj = 3\n");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "ensemble.n_traj"),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::from_toml_str(&format!("bogus = 1\n{MINIMAL}")).is_err());
    }

    #[test]
    fn bad_functional_is_reported_with_index() {
        let text = format!("{MINIMAL}\n[diagnostics]\nfunctionals = [\"one\", \"nope\"]\n");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "diagnostics.functionals[1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zoom_config_parses_without_source() {
        let text = r#"
            kind = "zoom_control"
            [plant]
            a = 2.0
            b = 1.0
            noise_std = 1.0
            [zoom_control]
            expansion = 4.0
            contraction = 0.5
            floor = 1.0
            m_lattice = [1, 1]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert!(cfg.source.is_none());
        match cfg.scheme {
            SchemeSection::Zoom { zoom, plant } => {
                assert_eq!(zoom.levels, None);
                assert!(zoom.require_coprime);
                assert_eq!(plant.a, 2.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_lattice_spacing() {
        let text = r#"
            kind = "goodman_gersho"
            [source]
            kind = "iid"
            noise_std = 1.0
            [goodman_gersho]
            thresholds = [1.0]
            log_steps = [-1, 2]
            m_lattice = [0, 1]
        "#;
        assert!(matches!(
            ExperimentConfig::from_toml_str(text),
            Err(Error::Config { ref path, .. }) if path == "goodman_gersho"
        ));
    }
}
