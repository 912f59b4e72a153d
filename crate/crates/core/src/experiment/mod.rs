//! Config-driven experiments: one TOML file selects a scheme, its source, the
//! ensemble size and the diagnostics, and a run writes CSVs plus a key-value
//! report.

mod config;
mod plan;
mod run;

pub use config::{
    CustomSchemeSection, DeltaModSection, DiagnosticsSection, EnsembleSection, ExperimentConfig, ExperimentKind,
    GoodmanGershoSection, SchemeSection, ToleranceSection, ZoomSection,
};
pub use plan::describe;
pub use run::{run_experiment, ExperimentOutput};
