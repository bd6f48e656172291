//! Configuration, caching, export and orchestration for `levi run`.

pub mod cache;
pub mod config;
pub mod error;
pub mod export;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use runner::{run, ExportMode, Manifest, RunOptions, RunSummary};
