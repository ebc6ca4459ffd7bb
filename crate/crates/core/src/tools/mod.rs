//! Retention pruning and the command-line entry point.

pub mod cli;
mod prune;

pub use cli::{cli_main, resolve_endpoint};
pub use prune::{prune, PolicyError, PruneOutcome, Pruned, RetentionPolicy};
