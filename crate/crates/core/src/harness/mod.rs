//! Experiment drivers: configs, datasets, sweeps and timing.

pub mod config;
pub mod dataset;
pub mod experiments;

pub use config::{ExperimentConfig, ExperimentSettings, RisSettings};
pub use dataset::{Dataset, DatasetHeader, LabeledSample};
pub use experiments::{
    distance_csv, elements_csv, evaluate_test_set, obtain_model, run_rate_vs_distance, run_rate_vs_distance_with,
    run_rate_vs_elements, run_timing_benchmark, time_decisions, timing_csv, train_classifier, train_on, DistanceRow,
    ElementsRow, ModelStore, Outcome, RateSummary, TimingRow,
};

use crate::error::{Error, Result};

/// Worker-count override; `0` or unset means one worker per core.
pub const THREADS_ENV: &str = "RIS_BEAMSEL_THREADS";

/// Sizes the global rayon pool from [`THREADS_ENV`]. Call once, before any parallel work.
pub fn configure_threads() -> Result<usize> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        _ => 0,
    };
    // A second call finds the pool already built; that is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(rayon::current_num_threads())
}
