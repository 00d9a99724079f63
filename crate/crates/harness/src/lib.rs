//! Monte Carlo experiments for verifier-filtered synthetic retraining.
//!
//! A TOML config names one of three experiments: the one-step `landscape`
//! over verifier bias and radius, `iterate`d linear-regression retraining,
//! or the 1-D `gaussian1d` mean estimator. Every random draw comes from a
//! stream keyed by the master seed and its replication, round and
//! direction, so results do not depend on the number of worker threads.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod contraction;
pub mod error;
pub mod iterate;
pub mod landscape;
pub mod output;
pub mod runner;
pub mod stats;
pub mod theory;
pub mod univariate;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, ExperimentKind, Resolved};
pub use error::{Error, Result};
pub use output::Format;
pub use runner::RunOptions;

use iterate::IterateResult;
use landscape::LandscapeResult;
use univariate::Gaussian1DResult;

#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Landscape(LandscapeResult),
    Iterate(IterateResult),
    Gaussian1d(Gaussian1DResult),
}

/// Run the experiment `config` describes.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<Report> {
    let seed = config.seed;
    let reps = config.replications;
    Ok(match config.resolve()? {
        Resolved::Landscape(spec) => Report::Landscape(landscape::run_landscape(&spec, seed, reps, options)?),
        Resolved::Iterate(spec) => Report::Iterate(iterate::run_iterative(&spec, seed, reps, options)?),
        Resolved::Gaussian1d(c) => Report::Gaussian1d(univariate::run_gaussian1d(&c, seed, reps, options)?),
    })
}

/// Write a report to `dir` as `landscape`, `trajectory` or `gaussian1d`
/// with the format's extension.
pub fn write_report(
    report: &Report,
    config: &ExperimentConfig,
    dir: &Path,
    format: Format,
) -> Result<PathBuf> {
    let config = config.with_defaults()?;
    match report {
        Report::Landscape(r) => output::write_records(
            dir,
            "landscape",
            format,
            &config,
            &output::landscape_rows(r),
            Some(serde_json::json!({
                "offset_direction": r.offset_direction,
                "baseline_mse": r.baseline_mse,
            })),
        ),
        Report::Iterate(r) => output::write_records(
            dir,
            "trajectory",
            format,
            &config,
            &output::trajectory_rows(r),
            Some(serde_json::json!({ "center": r.center })),
        ),
        Report::Gaussian1d(r) => output::write_records(
            dir,
            "gaussian1d",
            format,
            &config,
            &output::gaussian1d_rows(r),
            r.hitting.as_ref().map(|h| serde_json::json!({ "hitting": h })),
        ),
    }
}
