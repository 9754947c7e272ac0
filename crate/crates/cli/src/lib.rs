//! Configuration and subcommands behind the `airq` binary.

// `!(a <= b)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use config::{GridSpec, RunConfig, RunConfigFile};
