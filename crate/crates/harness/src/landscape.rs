//! One-step error-reduction landscape over verifier bias and radius.
//!
//! Each replication fits `theta_0` on real data and retrains once with `n1`
//! verified labels per direction, for every `(delta, r)` cell. All cells of
//! a replication share its real data and synthetic streams.

use nalgebra::DVector;
use serde::Serialize;
use verisim_core::linreg::{
    baseline_mse, generate_real_data, ols_fit_with, one_step_prediction, retrain_round, RetrainState,
    ScheduleUnit, SpectralDesign,
};
use verisim_core::{KnowledgeBall, ReplicationStreams, Schedule};

use crate::config::{LandscapeSpec, LogRatioStatistic};
use crate::error::{Error, Result};
use crate::runner::{covariate_setup, offset_direction, run_replications, RunOptions};
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// The verifier accepts (numerically) nothing in some replication.
    Degenerate,
    Failed,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Degenerate => "degenerate",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeCell {
    pub delta: f64,
    pub r: f64,
    pub sigma_c: f64,
    pub status: CellStatus,
    /// The configured log-ratio statistic.
    pub log_ratio: Option<Estimate>,
    /// `|theta_0 - theta_star|^2`.
    pub sq_error_before: Option<Estimate>,
    /// `|theta_1 - theta_star|^2`.
    pub sq_error_after: Option<Estimate>,
    /// `log(sqrt(baseline) / sqrt(prediction))` on the reference design.
    pub theory_log_ratio: Option<f64>,
    pub predicted_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeResult {
    pub offset_direction: Vec<f64>,
    pub baseline_mse: f64,
    pub replications: u64,
    pub cells: Vec<LandscapeCell>,
}

fn ball(spec: &LandscapeSpec, u: &DVector<f64>, delta: f64, r: f64) -> Result<KnowledgeBall> {
    let center = &spec.problem.true_theta + u * delta;
    Ok(KnowledgeBall::new(center, r, spec.slack)?)
}

/// Cells in row-major order: `deltas` outer, `radii` inner.
pub fn grid(spec: &LandscapeSpec) -> Vec<(f64, f64)> {
    spec.deltas
        .iter()
        .flat_map(|&d| spec.radii.iter().map(move |&r| (d, r)))
        .collect()
}

/// `(delta, r, predicted one-step MSE)`; `None` where the verifier is degenerate.
pub type CellPrediction = (f64, f64, Option<f64>);

/// The baseline MSE and per-cell predictions. No random draws beyond the
/// experiment-level ones.
pub fn landscape_theory(spec: &LandscapeSpec, seed: u64) -> Result<(f64, Vec<CellPrediction>)> {
    let p = spec.problem.dimension();
    let u = offset_direction(seed, p)?;
    let (_, reference) = covariate_setup(seed, &spec.problem)?;
    let design = SpectralDesign::with_policy(&reference, spec.problem.rank_policy)?;
    let baseline = baseline_mse(&design, spec.problem.sigma);
    let mut out = Vec::new();
    for (delta, r) in grid(spec) {
        let ball = ball(spec, &u, delta, r)?;
        let predicted = one_step_prediction(
            &design,
            &spec.problem.true_theta,
            &ball,
            spec.problem.sigma,
            spec.n1,
        )
        .ok();
        out.push((delta, r, predicted));
    }
    Ok((baseline, out))
}

pub fn run_landscape(
    spec: &LandscapeSpec,
    seed: u64,
    reps: u64,
    options: RunOptions,
) -> Result<LandscapeResult> {
    let p = spec.problem.dimension();
    let u = offset_direction(seed, p)?;
    let (law, _) = covariate_setup(seed, &spec.problem)?;
    let cells = grid(spec);
    let schedule = Schedule::fixed(spec.n1, 1)?;
    let configs = cells
        .iter()
        .map(|&(delta, r)| {
            Ok(spec.problem.linreg_config(
                ball(spec, &u, delta, r)?,
                law.clone(),
                schedule,
                ScheduleUnit::PerDirection,
                spec.filter_mode,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    for c in &configs {
        c.validate()?;
    }

    let per_rep = run_replications(
        reps,
        options,
        |rep| -> Result<Vec<Result<(f64, f64), verisim_core::Error>>> {
            let streams = ReplicationStreams::new(seed, rep)?;
            let data = generate_real_data(&configs[0], &mut streams.real_data()?)?;
            let design = SpectralDesign::with_policy(&data.covariates, spec.problem.rank_policy)?;
            let theta0 = ols_fit_with(&data, spec.problem.rank_policy)?;
            let before = (&theta0 - &spec.problem.true_theta).norm_squared();
            let state = RetrainState {
                theta_hat: theta0,
                round: 0,
            };
            Ok(configs
                .iter()
                .map(|c| {
                    let next = retrain_round(&state, &design, c, spec.n1, &streams)?;
                    Ok((
                        before,
                        (&next.theta_hat - &spec.problem.true_theta).norm_squared(),
                    ))
                })
                .collect())
        },
    )?;
    let per_rep = per_rep
        .into_iter()
        .enumerate()
        .map(|(rep, r)| {
            r.map_err(|e| match e {
                Error::Core(source) => Error::Replication {
                    replication: rep as u64,
                    source,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (baseline, theory) = landscape_theory(spec, seed)?;
    let mut out = Vec::with_capacity(cells.len());
    for (i, &(delta, r)) in cells.iter().enumerate() {
        let mut pairs = Vec::with_capacity(per_rep.len());
        let mut status = CellStatus::Ok;
        for (rep, results) in per_rep.iter().enumerate() {
            match &results[i] {
                Ok(pair) => pairs.push(*pair),
                Err(e) => {
                    log::warn!("cell delta = {delta}, r = {r}, replication {rep}: {e}");
                    status = match e.root() {
                        verisim_core::Error::Degenerate { .. }
                        | verisim_core::Error::MaxAttemptsExceeded { .. } => CellStatus::Degenerate,
                        _ => CellStatus::Failed,
                    };
                    break;
                }
            }
        }
        let predicted = theory[i].2;
        let theory_log_ratio = predicted.map(|m| 0.5 * (baseline / m).ln());
        let cell = if status == CellStatus::Ok {
            LandscapeCell {
                delta,
                r,
                sigma_c: spec.slack,
                status,
                log_ratio: log_ratio(&pairs, spec.log_ratio),
                sq_error_before: Estimate::from_values(pairs.iter().map(|p| p.0)),
                sq_error_after: Estimate::from_values(pairs.iter().map(|p| p.1)),
                theory_log_ratio,
                predicted_mse: predicted,
            }
        } else {
            LandscapeCell {
                delta,
                r,
                sigma_c: spec.slack,
                status,
                log_ratio: None,
                sq_error_before: None,
                sq_error_after: None,
                theory_log_ratio,
                predicted_mse: predicted,
            }
        };
        out.push(cell);
    }
    Ok(LandscapeResult {
        offset_direction: u.iter().copied().collect(),
        baseline_mse: baseline,
        replications: reps,
        cells: out,
    })
}

/// `log(|e0| / |e1|)` from squared errors `(e0^2, e1^2)`.
fn log_ratio(pairs: &[(f64, f64)], statistic: LogRatioStatistic) -> Option<Estimate> {
    match statistic {
        LogRatioStatistic::PerReplication => {
            Estimate::from_values(pairs.iter().map(|(b, a)| 0.5 * (b / a).ln()))
        }
        LogRatioStatistic::RatioOfMeans => {
            let n = pairs.len();
            if n == 0 {
                return None;
            }
            let before: Vec<f64> = pairs.iter().map(|p| p.0.sqrt()).collect();
            let after: Vec<f64> = pairs.iter().map(|p| p.1.sqrt()).collect();
            let nf = n as f64;
            let mb = before.iter().sum::<f64>() / nf;
            let ma = after.iter().sum::<f64>() / nf;
            let se = if n > 1 {
                // delta method for log(mean b) - log(mean a)
                let d = nf - 1.0;
                let vb = before.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / d;
                let va = after.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / d;
                let cov = before
                    .iter()
                    .zip(&after)
                    .map(|(x, y)| (x - mb) * (y - ma))
                    .sum::<f64>()
                    / d;
                let var = vb / (mb * mb) + va / (ma * ma) - 2.0 * cov / (mb * ma);
                (var.max(0.0) / nf).sqrt()
            } else {
                0.0
            };
            Some(Estimate {
                mean: (mb / ma).ln(),
                se,
                n,
            })
        }
    }
}
