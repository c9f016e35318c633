//! Coverage-probability simulation for standard-error estimators of the
//! sample median, applied to meta-analysis of log-ratios of medians.
//!
//! The crate is layered bottom-up:
//!
//! - [`distributions`]: the four parametric families used to generate data.
//! - [`estimators`]: density-based standard errors of the sample median.
//! - [`simulate`]: synthetic meta-analytic datasets and configuration grids.
//! - [`pooling`]: per-study effects, fixed/random-effects pooling, intervals.
//! - [`engine`]: trials, coverage aggregation and deterministic parallelism.
//! - [`config`] and [`output`]: JSON configuration and CSV/JSON writers.

pub mod config;
pub mod distributions;
pub mod engine;
mod error;
pub mod estimators;
mod optimize;
pub mod output;
pub mod pooling;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};

/// Version string written into every report and manifest.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
