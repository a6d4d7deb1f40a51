//! Scenario runner for the `aixi` library: config files, runs, reports.

pub mod config;
pub mod error;
pub mod scenario;

pub use config::{load_config, parse_config, AgentKind, BoundKind, EnvSpec, ScenarioConfig};
pub use error::{CliError, Result};
pub use scenario::{emit_report, execute, run_scenario, Report, RunArtifacts, TraceRow};
