//! Experiment presets, configuration files and output writers for the `kdvfd` binary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod preset;

pub use config::{apply_overrides, parse_config, parse_config_str, ConfigFile, DtRuleName, Overrides};
pub use error::CliError;
pub use experiment::{
    auto_record_every, convergence_sweep, emit_convergence_table, fmt17, run_experiment,
    write_table, RunReport, RunSummary, TableReport, THREADS_ENV,
};
pub use preset::{ExactSolution, ExperimentPreset, InitialData, PresetName};
