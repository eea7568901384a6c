//! Experiment files: TOML configuration, runs that write CSV and JSON outputs,
//! and comparisons against exact or limiting references.

pub mod compare;
pub mod config;
pub mod experiment;

pub use compare::{compare_laplace_tables, compare_report, parse_laplace_csv, Comparison, LaplaceTable, Reference};
pub use config::{ExperimentConfig, ModelConfig, OutputsConfig, ScheduleConfig, TopologyConfig, Tolerances, SEED_ENV};
pub use experiment::{run_experiment, Check, Report, REPORT_SCHEMA_VERSION};
