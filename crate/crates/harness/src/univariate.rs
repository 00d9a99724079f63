//! Repeated 1-D Gaussian mean estimation under an interval verifier.

use serde::Serialize;
use verisim_core::gaussian1d::{
    contraction_rate_1d, long_term_bound_1d, run_iterations, Crossing, Gaussian1DConfig, Trajectory1D,
};
use verisim_core::{FilterMode, ReplicationStreams};

use crate::error::{Error, Result};
use crate::runner::{run_replications, RunOptions};
use crate::stats::Estimate;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round1D {
    pub round: usize,
    /// `n0` at round 0.
    pub n_k: u64,
    pub mean_estimate: Estimate,
    /// Absent for unbounded intervals.
    pub dist_midpoint: Option<Estimate>,
    /// Bound on `E(mean - midpoint)^2`, finite intervals only.
    pub theory_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingSummary {
    pub level: f64,
    pub crossing: &'static str,
    pub hits: usize,
    pub replications: usize,
    /// First-hit rounds of the replications that hit.
    pub times: Vec<usize>,
}

impl HittingSummary {
    pub fn fraction(&self) -> f64 {
        self.hits as f64 / self.replications as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gaussian1DResult {
    pub rho: Option<f64>,
    pub rounds: Vec<Round1D>,
    pub hitting: Option<HittingSummary>,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory1D>,
}

/// Contraction rate of a finite interval; 1 when nothing is filtered.
pub fn rate_1d(config: &Gaussian1DConfig) -> Result<Option<f64>> {
    if config.filter_mode == FilterMode::None {
        return Ok(Some(1.0));
    }
    let bounds = config.standardized_bounds()?;
    if !bounds.is_finite() {
        return Ok(None);
    }
    Ok(Some(contraction_rate_1d(bounds)?))
}

/// `sigma^2` times the long-run bound, from a mean starting squared distance
/// `initial_sq` (in data units) to the midpoint.
pub fn theory_bounds_1d(config: &Gaussian1DConfig, initial_sq: f64) -> Result<Option<Vec<f64>>> {
    let Some(rho) = rate_1d(config)? else {
        return Ok(None);
    };
    if config.interval.midpoint().is_none() {
        return Ok(None);
    }
    let s2 = config.sigma * config.sigma;
    let counts = config.schedule.counts();
    (0..=counts.len())
        .map(|k| Ok(s2 * long_term_bound_1d(rho, initial_sq / s2, &counts, k)?))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

pub fn run_gaussian1d(
    config: &Gaussian1DConfig,
    seed: u64,
    reps: u64,
    options: RunOptions,
) -> Result<Gaussian1DResult> {
    config.validate()?;
    let trajectories = run_replications(reps, options, |rep| {
        let streams = ReplicationStreams::new(seed, rep)?;
        run_iterations(config, &streams).map_err(|source| Error::Replication {
            replication: rep,
            source,
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let counts = config.schedule.counts();
    let rounds = counts.len() + 1;
    let midpoint = config.interval.midpoint();
    // a stopped replication keeps its last value
    let mean_at = |t: &Trajectory1D, k: usize| t.records[k.min(t.records.len() - 1)].mean;
    let theory = match midpoint {
        Some(m) => {
            let initial = Estimate::from_values(trajectories.iter().map(|t| (mean_at(t, 0) - m).powi(2)))
                .expect("at least one replication");
            theory_bounds_1d(config, initial.mean)?
        }
        None => None,
    };
    let summary = (0..rounds)
        .map(|k| Round1D {
            round: k,
            n_k: if k == 0 { config.n0 } else { counts[k - 1] },
            mean_estimate: Estimate::from_values(trajectories.iter().map(|t| mean_at(t, k)))
                .expect("at least one"),
            dist_midpoint: midpoint
                .and_then(|m| Estimate::from_values(trajectories.iter().map(|t| (mean_at(t, k) - m).abs()))),
            theory_bound: theory.as_ref().map(|b| b[k]),
        })
        .collect();
    let hitting = config.stop.map(|stop| {
        let times: Vec<usize> = trajectories
            .iter()
            .filter_map(|t| verisim_core::gaussian1d::hitting_time(t, stop.level, stop.crossing))
            .collect();
        HittingSummary {
            level: stop.level,
            crossing: match stop.crossing {
                Crossing::Below => "below",
                Crossing::Above => "above",
            },
            hits: times.len(),
            replications: trajectories.len(),
            times,
        }
    });
    Ok(Gaussian1DResult {
        rho: rate_1d(config)?,
        rounds: summary,
        hitting,
        trajectories,
    })
}
