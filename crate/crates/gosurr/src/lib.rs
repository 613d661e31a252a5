//! Files, configuration and the command line around [`gosurr_core`].
//!
//! A run directory holds the materialized `config.json`, `convergence.csv`
//! (one row per iteration), `timing.csv`, `summary.json` and the latest
//! `checkpoint.json`. Floats in every file carry 17 significant digits.

pub mod checkpoint;
pub mod commands;
pub mod config;
mod error;
pub mod exec;
pub mod format;
pub mod output;

pub use error::{CliError, CliResult};
