//! Embedding files, CSV tables, reports and the command implementations
//! behind the `xling` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod format;
pub mod pipeline;
pub mod report;
pub mod tables;

pub use error::{Error, Result};
