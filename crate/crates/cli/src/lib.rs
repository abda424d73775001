//! Scenario files, command implementations and the invariant suite for the
//! `agepert` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod verify;

pub use config::ScenarioConfig;
pub use error::{CliError, CliResult, ExitCode};
