//! Command-line front end: run configuration and subcommand implementations.

pub mod commands;
pub mod config;
