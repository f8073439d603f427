//! Command-line experiments, run records and a rayon shard runner on top of
//! `degen-core`.

pub mod cli;
pub mod record;
pub mod runner;

pub use cli::{run, CliError};
pub use record::{RecordConfig, RunRecord, SCHEMA_VERSION};
pub use runner::RayonRunner;
