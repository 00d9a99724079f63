//! CSV and JSON result files.
//!
//! Missing values are empty CSV fields and `null` in JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::iterate::IterateResult;
use crate::landscape::LandscapeResult;
use crate::univariate::Gaussian1DResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeRow {
    pub delta: f64,
    pub r: f64,
    pub sigma_c: f64,
    pub log_ratio_mean: Option<f64>,
    pub log_ratio_se: Option<f64>,
    pub theory_log_ratio: Option<f64>,
    pub n_reps: u64,
    pub status: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub arm: &'static str,
    pub round: usize,
    pub n_k_per_direction: Option<u64>,
    pub dist_theta_star_mean: f64,
    pub dist_theta_star_se: f64,
    pub dist_center_mean: f64,
    pub dist_center_se: f64,
    pub theory_bound: f64,
    pub rho: f64,
    pub n_reps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gaussian1DRow {
    pub round: usize,
    pub n_k: u64,
    pub mean_estimate_mean: f64,
    pub mean_estimate_se: f64,
    pub dist_midpoint_mean: Option<f64>,
    pub dist_midpoint_se: Option<f64>,
    pub theory_bound: Option<f64>,
    pub n_reps: u64,
}

pub fn landscape_rows(result: &LandscapeResult) -> Vec<LandscapeRow> {
    result
        .cells
        .iter()
        .map(|c| LandscapeRow {
            delta: c.delta,
            r: c.r,
            sigma_c: c.sigma_c,
            log_ratio_mean: c.log_ratio.map(|e| e.mean),
            log_ratio_se: c.log_ratio.map(|e| e.se),
            theory_log_ratio: c.theory_log_ratio,
            n_reps: result.replications,
            status: c.status.as_str(),
        })
        .collect()
}

pub fn trajectory_rows(result: &IterateResult) -> Vec<TrajectoryRow> {
    result
        .arms
        .iter()
        .flat_map(|arm| {
            arm.rounds.iter().map(move |r| TrajectoryRow {
                arm: arm.arm.as_str(),
                round: r.round,
                n_k_per_direction: r.n_k_per_direction,
                dist_theta_star_mean: r.dist_theta_star.mean,
                dist_theta_star_se: r.dist_theta_star.se,
                dist_center_mean: r.dist_center.mean,
                dist_center_se: r.dist_center.se,
                theory_bound: r.theory_bound,
                rho: arm.rho,
                n_reps: result.replications,
            })
        })
        .collect()
}

pub fn gaussian1d_rows(result: &Gaussian1DResult) -> Vec<Gaussian1DRow> {
    result
        .rounds
        .iter()
        .map(|r| Gaussian1DRow {
            round: r.round,
            n_k: r.n_k,
            mean_estimate_mean: r.mean_estimate.mean,
            mean_estimate_se: r.mean_estimate.se,
            dist_midpoint_mean: r.dist_midpoint.map(|e| e.mean),
            dist_midpoint_se: r.dist_midpoint.map(|e| e.se),
            theory_bound: r.theory_bound,
            n_reps: r.mean_estimate.n as u64,
        })
        .collect()
}

/// Serialize `rows` as CSV with a header row.
pub fn write_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonDocument<'a, T, E> {
    version: &'static str,
    config: &'a ExperimentConfig,
    records: &'a [T],
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<E>,
}

/// `records` with the resolved config and the software version.
pub fn write_json<W: Write, T: Serialize, E: Serialize>(
    writer: W,
    config: &ExperimentConfig,
    records: &[T],
    extra: Option<E>,
) -> Result<()> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer_pretty(
        &mut w,
        &JsonDocument {
            version: env!("CARGO_PKG_VERSION"),
            config,
            records,
            extra,
        },
    )?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Write `<dir>/<stem>.<ext>`, creating `dir` if needed, and return the path.
pub fn write_records<T: Serialize, E: Serialize>(
    dir: &Path,
    stem: &str,
    format: Format,
    config: &ExperimentConfig,
    records: &[T],
    extra: Option<E>,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    match format {
        Format::Csv => write_csv(BufWriter::new(file), records)?,
        Format::Json => write_json(file, config, records, extra)?,
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_values_are_empty_fields() {
        let rows = [Gaussian1DRow {
            round: 0,
            n_k: 50,
            mean_estimate_mean: 0.25,
            mean_estimate_se: 0.5,
            dist_midpoint_mean: None,
            dist_midpoint_se: None,
            theory_bound: None,
            n_reps: 3,
        }];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "round,n_k,mean_estimate_mean,mean_estimate_se,dist_midpoint_mean,dist_midpoint_se,theory_bound,n_reps\n\
             0,50,0.25,0.5,,,,3\n"
        );
    }
}
