//! Simulation and empirical stability analysis of adaptive systems
//! `S_{k+1} = F(X_k, S_k)` driven by stationary sources.
//!
//! The crate is organised bottom-up:
//!
//! * [`sources`]: stationary i.i.d., AR and truncated-MA Gaussian sources.
//! * [`quantizers`]: the uniform `K`-bin quantizer with an overflow symbol and
//!   the one-bit quantizer.
//! * [`schemes`]: delta modulation, Goodman–Gersho step-size adaptation and
//!   the zoom quantizer, with step sizes held on exact integer lattices.
//! * [`control_loop`]: a scalar unstable plant stabilized through the zoom
//!   quantizer.
//! * [`diagnostics`]: tightness, occupation measures, time averages, and
//!   asymptotic-mean-stationarity and ergodicity consistency checks.
//! * [`experiment`]: config-driven runs that emit CSVs and a report.
//!
//! ```
//! use stabsim::diagnostics::tightness_statistic;
//! use stabsim::schemes::DeltaMod;
//! use stabsim::simulation::{ensemble_seeds, simulate_ensemble, Driven};
//! use stabsim::sources::{validate_spec, SourceSpec};
//!
//! let source = validate_spec(SourceSpec::iid(1.0, 0))?;
//! let system = Driven::new(DeltaMod::new(1.0)?, source, 1_000);
//! let ensemble = simulate_ensemble(&system, 0.0, &ensemble_seeds(1, 8), 2_000)?;
//! assert!(tightness_statistic(&ensemble, 10.0)? < 0.01);
//! # Ok::<(), stabsim::Error>(())
//! ```

// `!(x > y)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control_loop;
pub mod diagnostics;
mod error;
pub mod experiment;
pub mod quantizers;
pub mod schemes;
pub mod simulation;
pub mod sources;
pub mod trajectory;

pub use error::{Error, Result};
pub use trajectory::Trajectory;
