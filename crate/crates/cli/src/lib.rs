//! Command-line front end for the fuzzdrive simulator: config and params
//! parsing plus the subcommand implementations.

pub mod commands;
pub mod config;
pub mod params;
