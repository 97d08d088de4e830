//! Experiment runner for the stagewise local SGD simulator: config parsing,
//! single runs and multi-config sweeps with CSV output.

pub mod config;
pub mod experiment;
pub mod sweep;

pub use config::{Algorithm, ConfigError, ExperimentConfig, ObjectiveSpec, ReturnChoice};
pub use experiment::{
    build_plan, build_problem, run_experiment, run_problem, ExperimentOutput, Problem, RunError, SummaryRecord,
    SUMMARY_HEADER,
};
pub use sweep::{summary_csv, sweep, SweepError, SweepOptions, SweepReport};
