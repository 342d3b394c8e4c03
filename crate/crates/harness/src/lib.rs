//! Experiment harness: configuration, recipes and episode logs behind the
//! `rlvqsd` command.

pub mod cli;
pub mod config;
pub mod error;
pub mod records;
pub mod recipes;

pub use config::{ExperimentConfig, Problem, Resolved};
pub use error::HarnessError;
