//! Command-line front end for the geometric ODE toolkit: configuration
//! loading, input-file parsing, and the five subcommand drivers.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
