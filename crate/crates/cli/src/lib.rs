//! Command-line surface of the benchmark: config resolution, the results
//! directory, and the `run`, `sweep`, `report`, `plot` and `selftest` commands.

pub mod commands;
pub mod config;
pub mod store;

pub use commands::{build_report, cmd_plot, cmd_report, cmd_run, cmd_selftest, cmd_sweep};
pub use config::{load_config, parse_config, parse_config_str, preset, resolve_config, ConfigFile, Overrides};
pub use store::{ResultsStore, SweepPlan};

use mdal_core::MdalError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn from_core(e: MdalError) -> Self {
        match e {
            MdalError::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }

    /// 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}
