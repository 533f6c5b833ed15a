//! Command-line companion to [`phlink_core`]: experiment configuration,
//! trace files, run metadata, and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod metadata;
pub mod report;
pub mod seed;
