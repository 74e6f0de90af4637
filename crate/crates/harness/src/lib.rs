//! Experiment harness for MCMC-driven batch Thompson sampling: the
//! optimization loop, run directories, summaries and grid diagnostics.

pub mod config;
pub mod diagnose;
pub mod error;
pub mod output;
pub mod runner;
pub mod summary;

pub use config::{ProposerKind, RoutineKind, RunConfig};
pub use error::{HarnessError, Result};
