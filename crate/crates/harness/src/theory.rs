//! Closed-form predictions for a config, without simulation.

use serde::Serialize;
use verisim_core::gaussian1d::geometric_bound;
use verisim_core::gaussian1d::Gaussian1DConfig;
use verisim_core::linreg::{baseline_mse, effective_rate, SpectralDesign};

use crate::config::{IterateSpec, LandscapeSpec, Resolved};
use crate::error::Result;
use crate::iterate::{arms, iterate_ball};
use crate::landscape::landscape_theory;
use crate::runner::covariate_setup;
use crate::univariate::{rate_1d, theory_bounds_1d};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeTheoryRow {
    pub delta: f64,
    pub r: f64,
    pub sigma_c: f64,
    pub baseline_mse: f64,
    pub one_step_mse: Option<f64>,
    pub theory_log_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateTheoryRow {
    pub arm: &'static str,
    pub round: usize,
    pub n_k_per_direction: Option<u64>,
    pub theory_bound: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gaussian1DTheoryRow {
    pub round: usize,
    pub n_k: u64,
    pub theory_bound: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TheoryReport {
    Landscape(Vec<LandscapeTheoryRow>),
    Iterate(Vec<IterateTheoryRow>),
    Gaussian1d(Vec<Gaussian1DTheoryRow>),
}

pub fn theory_report(resolved: &Resolved, seed: u64) -> Result<TheoryReport> {
    Ok(match resolved {
        Resolved::Landscape(spec) => TheoryReport::Landscape(landscape_rows(spec, seed)?),
        Resolved::Iterate(spec) => TheoryReport::Iterate(iterate_rows(spec, seed)?),
        Resolved::Gaussian1d(config) => TheoryReport::Gaussian1d(gaussian1d_rows(config)?),
    })
}

fn landscape_rows(spec: &LandscapeSpec, seed: u64) -> Result<Vec<LandscapeTheoryRow>> {
    let (baseline, cells) = landscape_theory(spec, seed)?;
    Ok(cells
        .into_iter()
        .map(|(delta, r, predicted)| LandscapeTheoryRow {
            delta,
            r,
            sigma_c: spec.slack,
            baseline_mse: baseline,
            one_step_mse: predicted,
            theory_log_ratio: predicted.map(|m| 0.5 * (baseline / m).ln()),
        })
        .collect())
}

/// Bounds start from the expected initial error `delta^2 + baseline`.
fn iterate_rows(spec: &IterateSpec, seed: u64) -> Result<Vec<IterateTheoryRow>> {
    let (law, reference) = covariate_setup(seed, &spec.problem)?;
    let design = SpectralDesign::with_policy(&reference, spec.problem.rank_policy)?;
    let initial = spec.delta * spec.delta + baseline_mse(&design, spec.problem.sigma);
    let ball = iterate_ball(spec, seed)?;
    let p = spec.problem.dimension() as f64;
    let mut rows = Vec::new();
    for (arm, mode) in arms(spec) {
        let config =
            spec.problem
                .linreg_config(ball.clone(), law.clone(), spec.schedule, spec.schedule_unit, mode);
        let rho = effective_rate(&config)?;
        let counts = config.per_direction_counts();
        let s2 = spec.problem.sigma * spec.problem.sigma;
        for k in 0..=counts.len() {
            rows.push(IterateTheoryRow {
                arm: arm.as_str(),
                round: k,
                n_k_per_direction: (k > 0).then(|| counts[k - 1]),
                theory_bound: geometric_bound(rho, initial, p * s2, &counts, k)?,
                rho,
            });
        }
    }
    Ok(rows)
}

/// Bounds start from the expected initial error `(mu - m)^2 + sigma^2 / n0`.
fn gaussian1d_rows(config: &Gaussian1DConfig) -> Result<Vec<Gaussian1DTheoryRow>> {
    let initial = config
        .interval
        .midpoint()
        .map(|m| (config.true_mean - m).powi(2) + config.sigma * config.sigma / config.n0 as f64);
    let bounds = match initial {
        Some(initial) => theory_bounds_1d(config, initial)?,
        None => None,
    };
    let rho = rate_1d(config)?;
    let counts = config.schedule.counts();
    Ok((0..=counts.len())
        .map(|k| Gaussian1DTheoryRow {
            round: k,
            n_k: if k == 0 { config.n0 } else { counts[k - 1] },
            theory_bound: bounds.as_ref().map(|b| b[k]),
            rho,
        })
        .collect())
}
