//! chromafit designs a physical transmittance filter for a given camera so
//! that the filtered camera measures color better: either as close as
//! possible to being a linear recoding of the CIE XYZ color matching
//! functions, or as accurate as possible at predicting XYZ tristimuli over
//! measured lights and reflectances, with optional smoothness and
//! transmittance constraints and multi-start seeding.
//!
//! The main entry points:
//!
//! - [`luther::optimize_luther`] -- alternating least squares on the camera
//!   sensitivities themselves.
//! - [`driven::optimize_data`] -- alternating least squares against measured
//!   color signals, with [`driven::ConstraintSpec`] selecting unconstrained,
//!   positive-only, or basis/bounded filters.
//! - [`seeding::generate_seed_set`] / [`seeding::multi_start`] -- sample many
//!   feasible seed filters and keep the best converged result.
//! - [`metrics::evaluate`] -- the delta E error-statistics harness, plus
//!   [`metrics::vora_value`] for spectral match.
//! - [`runs`] -- the file-writing workflows behind the `chromafit` binary.
//!
//! Each major capability has a runnable demonstration under `examples/`:
//!
//! ```bash
//! cargo run --release --example luther_filter
//! cargo run --release --example data_driven_filter
//! cargo run --release --example constrained_filter
//! cargo run --release --example seed_sampling
//! cargo run --release --example multistart_search
//! cargo run --release --example camera_evaluation
//! ```

pub mod basis;
pub mod driven;
mod error;
pub mod lls;
pub mod luther;
pub mod metrics;
pub mod runs;
pub mod seeding;
pub mod solvers;
pub mod spectral;
pub mod synth;
pub mod tables;

pub use error::{Error, Result};
