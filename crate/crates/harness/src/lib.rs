//! Experiment harness for `minactor-core`: JSON configuration, parallel
//! seed runs, CSV/JSON artifacts, resumable searches and report tables.

pub mod cli;
pub mod config;
mod error;
pub mod experiment;
pub mod record;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
