//! Library side of the `bdpsim` command: scenario file parsing and the CSV
//! tables written by each subcommand.

pub mod config;
pub mod output;

pub use config::{apply_overrides, parse_config, parse_config_str, ConfigError, Origin};
pub use output::{
    emit_grid, emit_series, emit_summary, grid_csv, report, series_csv, summary_csv, OutputError,
    GRID_CSV, SERIES_CSV, SUMMARY_CSV,
};
