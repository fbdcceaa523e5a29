//! Library surface of the experiment CLI, exposed for integration tests.

pub mod commands;
pub mod config;

pub use commands::{
    execute_experiment, mig_report, run_experiment, run_verifiers, summary_json, write_artifacts,
    write_verify_report, CommandError, ExperimentOutcome, TrialResult,
};
pub use config::{parse_config, ConfigError, ExperimentConfig};
