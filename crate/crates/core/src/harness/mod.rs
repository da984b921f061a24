//! Experiment harness: configuration, the scenario runner, metrics, and
//! parameter sweeps.

pub mod config;
pub mod metrics;
pub mod runner;
pub mod sweep;
