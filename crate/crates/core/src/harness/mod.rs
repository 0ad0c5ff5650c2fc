//! Scenarios, experiment orchestration, the property suite and the CLI.

pub mod cli;
pub mod experiment;
pub mod output;
pub mod scenario;
pub mod verify;

pub use experiment::{run_experiment, sweep_beta, ExperimentOptions, ExperimentResult, RunSummary, SweepResult, SweepRow};
pub use scenario::{load_scenario, parse_scenario, AlgorithmChoice, Scenario};
