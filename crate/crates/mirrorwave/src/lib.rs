//! Configuration-driven runner around `mirrorwave-core`: JSON scenarios,
//! CSV and SVG output and the `mirrorwave` command line.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;

pub use config::ScenarioConfig;
pub use error::CliError;
