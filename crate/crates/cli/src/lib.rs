//! Config-driven experiment runner for the `eigenpath` engine.
//!
//! A run reads one JSON experiment description, dispatches to the requested
//! route and returns a [`ResultBundle`] of tables and residuals.

pub mod bundle;
pub mod config;
pub mod error;
pub mod routes;

pub use bundle::{emit, Format, Residual, ResultBundle, Table};
pub use config::{ExperimentConfig, SCHEMA_VERSION};
pub use error::{exit, CliError};
pub use routes::run;
