//! File formats, run configuration and the `pltune` command line, built on
//! [`pltune_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod formats;
pub mod output;
