//! Experiment configuration and batch execution for the `wpmec` binary.

pub mod config;
pub mod experiment;

pub use config::{Config, ConfigError, Sweep, SweepAxis};
pub use experiment::{execute, run_experiment, write_outputs, ExperimentError, RunRecord};
