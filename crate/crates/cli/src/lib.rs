//! File formats and configuration parsing for the `gch` command-line tool.

pub mod config;
pub mod fieldfile;
