//! Experiment driver for `mpdo-core`: JSON configs in, `result.json`,
//! `table.csv` and `plot.gp` out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod record;
pub mod run;

pub use config::{parse_config_file, parse_config_str, Command, RunConfig};
pub use error::CliError;
pub use record::ResultRecord;
pub use run::{execute, run, run_with_threads};
