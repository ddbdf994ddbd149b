//! File formats, configuration and the `dcepcc` command-line tool around
//! [`dcepcc_core`].
//!
//! - [`config`]: flat TOML run configuration with `key=value` overrides.
//! - [`csvio`]: CSV datasets with first-appearance label mapping.
//! - [`checkpoint`]: versioned JSON checkpoints.
//! - [`commands`]: train, eval, openset, grid and gradcheck.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod gradcheck;
pub mod grid;

pub use error::{CliError, CliResult};
