//! Configuration, commands and file output behind the `rank-surfaces` binary.

// `!(x >= 0.0)` is the NaN-rejecting form used throughout validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_bench, cmd_run, cmd_sir, Invocation};
pub use config::ExperimentConfig;
pub use error::CliError;
