//! Linear regression retrained on verified synthetic labels.
//!
//! The synthetic design repeats each right singular vector `v_j` of the real
//! covariates as a block of rows. Within block `j` every label is
//! `v_j.theta_hat + sigma * xi`, so the refit reduces to `p` independent 1-D
//! mean estimates `theta_proj_j`, and the new estimator is
//! `sum_j v_j * theta_proj_j`. Under the verifier, `xi` is a standard normal
//! truncated to [`direction_bounds`] for that direction.

mod design;
mod theory;

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub use design::{ols_fit, ols_fit_with, Dataset, RankPolicy, SpectralDesign};
pub use theory::{baseline_mse, long_term_bound, one_step_prediction};

use crate::error::{Error, Result};
use crate::gaussian1d::{rejection_step, truncated_step, unfiltered_step};
use crate::schedule::Schedule;
use crate::stream::ReplicationStreams;
use crate::truncnorm::acceptance_probability;
use crate::verifier::{contraction_rate, direction_bounds, verify_point, KnowledgeBall};
use crate::FilterMode;

/// How the real covariates `X0` are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateLaw {
    /// I.i.d. standard normal entries, drawn per replication.
    StandardNormal,
    /// The same `n0 x p` matrix in every replication.
    Fixed(DMatrix<f64>),
}

/// Whether schedule counts are totals over all directions or per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleUnit {
    /// Per-direction count is `max(1, floor(total / p))`.
    #[default]
    Total,
    PerDirection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinRegConfig {
    pub true_theta: DVector<f64>,
    pub ball: KnowledgeBall,
    pub sigma: f64,
    pub n0: usize,
    pub schedule: Schedule,
    pub schedule_unit: ScheduleUnit,
    pub covariate_law: CovariateLaw,
    pub filter_mode: FilterMode,
    pub rank_policy: RankPolicy,
}

impl LinRegConfig {
    pub fn dimension(&self) -> usize {
        self.true_theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dimension();
        if p == 0 {
            return Err(Error::invalid("true_theta", "must be non-empty"));
        }
        if self.ball.dimension() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: self.ball.dimension(),
            });
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", "must be finite and non-negative"));
        }
        if self.sigma == 0.0 && self.filter_mode != FilterMode::None {
            return Err(Error::invalid("sigma", "verified retraining needs sigma > 0"));
        }
        match &self.covariate_law {
            CovariateLaw::StandardNormal => {
                if self.n0 < p && self.rank_policy == RankPolicy::Strict {
                    return Err(Error::invalid("n0", "must be at least the dimension p"));
                }
            }
            CovariateLaw::Fixed(x) => {
                if x.ncols() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: x.ncols(),
                    });
                }
                if x.nrows() != self.n0 {
                    return Err(Error::DimensionMismatch {
                        expected: self.n0,
                        found: x.nrows(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Per-direction `n_k` for every round.
    pub fn per_direction_counts(&self) -> Vec<u64> {
        let p = self.dimension() as u64;
        self.schedule
            .counts()
            .into_iter()
            .map(|n| match self.schedule_unit {
                ScheduleUnit::Total => (n / p).max(1),
                ScheduleUnit::PerDirection => n,
            })
            .collect()
    }
}

/// `n x p` covariates under `law`, drawn row by row.
pub fn generate_covariates<R: Rng + ?Sized>(
    law: &CovariateLaw,
    n: usize,
    p: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    match law {
        CovariateLaw::StandardNormal => Ok(DMatrix::from_row_iterator(
            n,
            p,
            (0..n * p).map(|_| rng.sample::<f64, _>(StandardNormal)),
        )),
        CovariateLaw::Fixed(x) => {
            if x.shape() != (n, p) {
                return Err(Error::DimensionMismatch {
                    expected: n * p,
                    found: x.len(),
                });
            }
            Ok(x.clone())
        }
    }
}

/// Real data `(X0, X0 theta_star + sigma * xi)`.
pub fn generate_real_data<R: Rng + ?Sized>(config: &LinRegConfig, rng: &mut R) -> Result<Dataset> {
    config.validate()?;
    let x = generate_covariates(&config.covariate_law, config.n0, config.dimension(), rng)?;
    let noise = DVector::from_iterator(
        config.n0,
        (0..config.n0).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    let y = &x * &config.true_theta + noise * config.sigma;
    Dataset::new(x, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrainState {
    pub theta_hat: DVector<f64>,
    pub round: usize,
}

/// Per-direction estimates `theta_proj_j` for the round `state.round`, each
/// from `n_k` kept labels. Direction `j` draws from
/// `streams.synthetic(state.round, j)`.
pub fn retrain_projections(
    state: &RetrainState,
    design: &SpectralDesign,
    config: &LinRegConfig,
    n_k: u64,
    streams: &ReplicationStreams,
) -> Result<DVector<f64>> {
    let round = state.round;
    let sigma = config.sigma;
    let mut projections = DVector::zeros(design.len());
    for j in 0..design.len() {
        let v = design.direction(j);
        let here = |e: Error| e.at_round(round, Some(j));
        let mut rng = streams.synthetic(round, j).map_err(here)?;
        let current = v.dot(&state.theta_hat);
        projections[j] = match config.filter_mode {
            FilterMode::Direct => {
                let bounds = direction_bounds(&config.ball, &v, &state.theta_hat, sigma).map_err(here)?;
                truncated_step(current, sigma, bounds, n_k, &mut rng)
            }
            FilterMode::Reject => {
                let bounds = direction_bounds(&config.ball, &v, &state.theta_hat, sigma).map_err(here)?;
                acceptance_probability(bounds).map_err(here)?;
                rejection_step(
                    current,
                    sigma,
                    n_k,
                    |y| verify_point(&config.ball, &v, y),
                    &mut rng,
                )
            }
            FilterMode::None => unfiltered_step(current, sigma, n_k, &mut rng),
        }
        .map_err(here)?;
    }
    Ok(projections)
}

/// `theta_hat^{k+1} = sum_j v_j * theta_proj_j`.
pub fn retrain_round(
    state: &RetrainState,
    design: &SpectralDesign,
    config: &LinRegConfig,
    n_k: u64,
    streams: &ReplicationStreams,
) -> Result<RetrainState> {
    let projections = retrain_projections(state, design, config, n_k, streams)?;
    Ok(RetrainState {
        theta_hat: design.directions() * projections,
        round: state.round + 1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrainRecord {
    pub round: usize,
    /// Real-sample count `n0` at round 0, per-direction `n_{k-1}` afterwards.
    pub n_k: u64,
    pub theta_hat: DVector<f64>,
    pub dist_theta_star: f64,
    pub dist_center: f64,
    /// Long-run bound on `|theta_hat - theta_c|^2` from this replication's
    /// starting point; unfiltered runs use rate 1.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrainTrajectory {
    pub design: SpectralDesign,
    pub records: Vec<RetrainRecord>,
}

/// Contraction rate used for the long-run bound: `m2(-b, b)` when filtering,
/// 1 without a verifier.
pub fn effective_rate(config: &LinRegConfig) -> Result<f64> {
    match config.filter_mode {
        FilterMode::None => Ok(1.0),
        _ => contraction_rate(&config.ball, config.sigma),
    }
}

/// Fit on real data, then retrain for every scheduled round.
pub fn run_retraining(config: &LinRegConfig, streams: &ReplicationStreams) -> Result<RetrainTrajectory> {
    config.validate()?;
    let data = generate_real_data(config, &mut streams.real_data()?)?;
    let design = SpectralDesign::with_policy(&data.covariates, config.rank_policy)?;
    let theta0 = ols_fit_with(&data, config.rank_policy)?;
    let counts = config.per_direction_counts();
    let center = config.ball.center();
    let p = config.dimension() as f64;
    let rho = effective_rate(config)?;
    let initial_sq = (&theta0 - center).norm_squared();
    let sigma2 = config.sigma * config.sigma;

    let record = |state: &RetrainState, n_k: u64| -> Result<RetrainRecord> {
        let bound = crate::gaussian1d::geometric_bound(rho, initial_sq, p * sigma2, &counts, state.round)?;
        Ok(RetrainRecord {
            round: state.round,
            n_k,
            dist_theta_star: (&state.theta_hat - &config.true_theta).norm(),
            dist_center: (&state.theta_hat - center).norm(),
            theta_hat: state.theta_hat.clone(),
            bound,
        })
    };

    let mut state = RetrainState {
        theta_hat: theta0,
        round: 0,
    };
    let mut records = Vec::with_capacity(counts.len() + 1);
    records.push(record(&state, config.n0 as u64)?);
    for &n_k in &counts {
        state = retrain_round(&state, &design, config, n_k, streams)?;
        records.push(record(&state, n_k)?);
    }
    Ok(RetrainTrajectory { design, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian1d;
    use approx::assert_abs_diff_eq;

    fn config(mode: FilterMode, sigma: f64) -> LinRegConfig {
        let p = 4;
        let theta = DVector::from_element(p, 1.0);
        let mut center = theta.clone();
        center[0] += 0.6;
        LinRegConfig {
            ball: KnowledgeBall::new(center, 0.8, 0.3).unwrap(),
            true_theta: theta,
            sigma,
            n0: 40,
            schedule: Schedule::fixed(40, 5).unwrap(),
            schedule_unit: ScheduleUnit::PerDirection,
            covariate_law: CovariateLaw::StandardNormal,
            filter_mode: mode,
            rank_policy: RankPolicy::Strict,
        }
    }

    #[test]
    fn unfiltered_noiseless_round_is_a_fixed_point() {
        let c = config(FilterMode::None, 0.0);
        let streams = ReplicationStreams::new(1, 0).unwrap();
        let data = generate_real_data(&c, &mut streams.real_data().unwrap()).unwrap();
        assert_abs_diff_eq!(data.responses, &data.covariates * &c.true_theta, epsilon = 0.0);
        let design = SpectralDesign::new(&data.covariates).unwrap();
        let state = RetrainState {
            theta_hat: DVector::from_column_slice(&[0.3, -1.0, 2.0, 0.7]),
            round: 0,
        };
        let next = retrain_round(&state, &design, &c, 10, &streams).unwrap();
        assert_abs_diff_eq!(next.theta_hat, state.theta_hat, epsilon = 1e-12);
        assert_eq!(next.round, 1);
    }

    #[test]
    fn direct_mode_reduces_to_the_1d_step_bit_for_bit() {
        let c = config(FilterMode::Direct, 1.3);
        let streams = ReplicationStreams::new(9, 4).unwrap();
        let data = generate_real_data(&c, &mut streams.real_data().unwrap()).unwrap();
        let design = SpectralDesign::new(&data.covariates).unwrap();
        let state = RetrainState {
            theta_hat: ols_fit(&data).unwrap(),
            round: 3,
        };
        let projections = retrain_projections(&state, &design, &c, 25, &streams).unwrap();
        for j in 0..design.len() {
            let v = design.direction(j);
            let bounds = direction_bounds(&c.ball, &v, &state.theta_hat, c.sigma).unwrap();
            let mut rng = streams.synthetic(3, j).unwrap();
            let one_d =
                gaussian1d::truncated_step(v.dot(&state.theta_hat), c.sigma, bounds, 25, &mut rng).unwrap();
            assert_eq!(projections[j].to_bits(), one_d.to_bits());
        }
    }

    #[test]
    fn centered_ball_keeps_the_estimate_on_average() {
        let mut c = config(FilterMode::Direct, 1.0);
        let theta_hat = DVector::from_column_slice(&[0.5, 1.5, -0.5, 2.0]);
        c.ball = KnowledgeBall::new(theta_hat.clone(), 0.5, 0.2).unwrap();
        let design = SpectralDesign::new(&DMatrix::identity(4, 4)).unwrap();
        let state = RetrainState {
            theta_hat: theta_hat.clone(),
            round: 0,
        };
        let reps = 4000;
        let mut mean = DVector::zeros(4);
        for rep in 0..reps {
            let streams = ReplicationStreams::new(2, rep).unwrap();
            mean += retrain_round(&state, &design, &c, 10, &streams)
                .unwrap()
                .theta_hat;
        }
        mean /= reps as f64;
        // per-coordinate sd of the mean is below sqrt(1 / (10 * reps))
        assert_abs_diff_eq!(mean, theta_hat, epsilon = 5.0 / libm::sqrt(10.0 * reps as f64));
    }

    #[test]
    fn run_retraining_shapes() {
        let mut c = config(FilterMode::Direct, 1.0);
        let streams = ReplicationStreams::new(3, 1).unwrap();
        let t = run_retraining(&c, &streams).unwrap();
        assert_eq!(t.records.len(), 6);
        assert_eq!(t.records[0].n_k, 40);
        assert_abs_diff_eq!(
            t.records[0].bound,
            t.records[0].dist_center.powi(2),
            epsilon = 1e-12
        );
        assert_eq!(t, run_retraining(&c, &streams).unwrap());

        c.schedule = Schedule::fixed(40, 0).unwrap();
        assert_eq!(run_retraining(&c, &streams).unwrap().records.len(), 1);

        c.filter_mode = FilterMode::Reject;
        c.schedule = Schedule::fixed(8, 3).unwrap();
        assert_eq!(run_retraining(&c, &streams).unwrap().records.len(), 4);
    }

    #[test]
    fn total_schedule_is_split_across_directions() {
        let mut c = config(FilterMode::Direct, 1.0);
        c.schedule = Schedule::linear(2, 41, 3).unwrap();
        c.schedule_unit = ScheduleUnit::Total;
        // totals 2, 22 (21.5 rounds up), 41 over p = 4
        assert_eq!(c.per_direction_counts(), [1, 5, 10]);
        c.schedule_unit = ScheduleUnit::PerDirection;
        assert_eq!(c.per_direction_counts(), [2, 22, 41]);
    }

    #[test]
    fn config_validation() {
        let mut c = config(FilterMode::Direct, 0.0);
        assert!(c.validate().is_err());
        c.sigma = 1.0;
        c.n0 = 3;
        assert!(c.validate().is_err());
        c.n0 = 10;
        c.covariate_law = CovariateLaw::Fixed(DMatrix::zeros(10, 3));
        assert!(c.validate().is_err());
    }
}
