//! Command implementations behind the `pairscreen` binary.

pub mod analyze;
pub mod charts;
pub mod config;
pub mod demo;
pub mod error;
pub mod simulate;
pub mod svg;

pub use error::{CliError, CliResult};
