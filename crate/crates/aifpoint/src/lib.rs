//! Command-line companion to `aifpoint-core`: configuration files, trajectory
//! logs, recorder ingest, batch runner and analyses.

pub use aifpoint_core as core;

pub mod analyze;
pub mod config;
mod error;
pub mod ingest;
pub mod log;
pub mod runner;

pub use error::{Error, Result};
