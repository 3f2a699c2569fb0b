//! Experiment driver for the `varfrac` command-line tool.

pub mod config;
pub mod csvio;
pub mod run;
