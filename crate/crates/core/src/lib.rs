//! Attribute process-discovery quality to event-log meta-features with
//! Shapley values.
//!
//! A study enumerates target configurations (feature subsets with target
//! values), calibrates a generator until a log matches each target,
//! discovers models with every miner, measures them, and turns the
//! measurements into coalition games whose Shapley values are ranked and
//! correlated.
//!
//! Output directory of [`pipeline::run`]:
//!
//! ```text
//! config.json          snapshot of the run configuration
//! checkpoint.json      completed count, CSV byte offsets, elapsed time
//! logs/<id>.xes        accepted generated logs
//! generation.csv       one row per configuration
//! features.csv         eight meta-features per accepted log
//! measurements.csv     one row per configuration and miner
//! shapley.csv          one row per game and player
//! ranking.csv  correlations.csv  robustness.csv  feasibility.csv
//! mean_attribution.csv summary.txt
//! ```

pub mod analysis;
pub mod conformance;
pub mod discovery;
pub mod error;
pub mod eventlog;
pub mod features;
pub mod generator;
pub mod pipeline;
pub mod shapley;

pub use error::{Error, Result};
