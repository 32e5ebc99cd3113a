//! Experiment driver for `polarsec-core`: experiment files, a profile and
//! set-family cache, seeded parallel Monte-Carlo runs, CSV reports,
//! binary transcripts and the `polarsec` command line.

pub mod cache;
pub mod cli;
pub mod error;
pub mod parallel;
pub mod report;
pub mod spec;
pub mod transcript;

pub use error::HarnessError;
