//! Batch drivers: parameter sweeps and case suites fan out across worker
//! threads when the `parallel` feature (default) is enabled.
//!
//! Every driver has an always-sequential twin so the two execution modes
//! can be compared in one build (see `benches/parallel.rs`). Results are
//! returned in input order either way, and a single scenario is always
//! integrated on one thread, so per-trajectory bit-exactness does not
//! depend on the feature.

use crate::engine::{simulate, Scenario, Trajectory};
use crate::error::Result;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every item, in input order.
#[cfg(feature = "parallel")]
pub fn map_cases<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

/// Applies `f` to every item, in input order.
#[cfg(not(feature = "parallel"))]
pub fn map_cases<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    map_cases_seq(items, f)
}

/// Sequential twin of [`map_cases`].
pub fn map_cases_seq<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Runs each scenario on its own worker.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<Trajectory>> {
    map_cases(scenarios, simulate)
}

/// Sequential twin of [`run_batch`].
pub fn run_batch_seq(scenarios: &[Scenario]) -> Vec<Result<Trajectory>> {
    map_cases_seq(scenarios, simulate)
}
