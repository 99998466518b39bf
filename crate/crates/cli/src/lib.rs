//! Command-line front end: experiment configs, trace and schedule CSVs, and
//! the `offline`, `simulate`, `experiment`, `cdf` and `fill` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{execute, run, Cli, Command, GlobalArgs, Output, Outputs};
pub use config::{ExperimentConfig, ScenarioRef};
pub use error::{CliError, CliResult};
