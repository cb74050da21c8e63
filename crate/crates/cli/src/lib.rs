//! Experiment front end for the `qsurrogate` library.
//!
//! Every verb of the `qsurrogate` binary is a function in [`commands`], so
//! tests can drive the same code paths without spawning a process.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod compare;
pub mod complexity;
pub mod config;
pub mod error;
pub mod infer;
pub mod pipeline;

pub use error::{CliError, CliResult};
