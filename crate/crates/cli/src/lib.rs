//! Batch front end for dyadlab: experiment files, suites and subcommands.

pub mod experiment;
pub mod roster;
pub mod run;
pub mod suites;

pub use run::{run, Cli};
