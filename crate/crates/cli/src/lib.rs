//! Command-line harness: argument surface, output bookkeeping and the
//! acceptance thresholds.

pub mod check;
pub mod cli;
pub mod commands;
pub mod config;
pub mod frames;
pub mod output;
pub mod svg;

pub use commands::{Outcome, UsageError};
