//! Batch front end for `bicx`: file formats, verb dispatch and reports.

pub mod format;
pub mod report;
pub mod run;

pub use run::{execute, exit_code, run, Cli, Command};
