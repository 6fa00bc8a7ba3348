//! Experiment runner library behind the `rro` binary: configuration loading,
//! the four case-study drivers, and CSV artifact emission.

pub mod config;
pub mod emit;
pub mod experiments;
pub mod report;

pub use config::{load, ExperimentConfig, ExperimentKind, Overrides};
pub use experiments::{run, RunOutcome};
pub use report::report;
