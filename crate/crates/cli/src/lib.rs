//! Scenario files, batch runner and report emitter for `dba-core`.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{parse_config, OutputFormat, Overrides, Scenario, SweepPoint};
pub use report::emit_report;
pub use runner::{run_scenario, BatchOutcome, ScenarioOutcome};
