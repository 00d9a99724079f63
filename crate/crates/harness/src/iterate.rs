//! Iterative retraining of linear regression, with and without a verifier.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use verisim_core::linreg::{effective_rate, run_retraining, LinRegConfig, RetrainTrajectory};
use verisim_core::{FilterMode, KnowledgeBall, ReplicationStreams};

use crate::config::IterateSpec;
use crate::error::{Error, Result};
use crate::runner::{covariate_setup, offset_direction, run_replications, RunOptions};
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Retraining through the configured verifier.
    Filtered,
    /// Retraining on every synthetic label.
    None,
}

impl Arm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arm::Filtered => "filtered",
            Arm::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundSummary {
    pub round: usize,
    /// `None` at round 0, which is the real-data fit.
    pub n_k_per_direction: Option<u64>,
    pub dist_theta_star: Estimate,
    pub dist_center: Estimate,
    pub sq_dist_theta_star: Estimate,
    pub sq_dist_center: Estimate,
    /// Long-run bound on `E|theta_k - theta_c|^2` from the mean starting error.
    pub theory_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub rho: f64,
    pub rounds: Vec<RoundSummary>,
    #[serde(skip)]
    pub trajectories: Vec<RetrainTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateResult {
    pub center: Vec<f64>,
    pub replications: u64,
    pub arms: Vec<ArmResult>,
}

impl IterateResult {
    pub fn arm(&self, arm: Arm) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.arm == arm)
    }
}

/// The knowledge ball `B_r(theta_star + delta * u)` of an iterate experiment.
pub fn iterate_ball(spec: &IterateSpec, seed: u64) -> Result<KnowledgeBall> {
    let u = offset_direction(seed, spec.problem.dimension())?;
    Ok(KnowledgeBall::new(
        &spec.problem.true_theta + u * spec.delta,
        spec.radius,
        spec.slack,
    )?)
}

fn arm_config(spec: &IterateSpec, seed: u64, mode: FilterMode) -> Result<LinRegConfig> {
    let (law, _) = covariate_setup(seed, &spec.problem)?;
    let config = spec.problem.linreg_config(
        iterate_ball(spec, seed)?,
        law,
        spec.schedule,
        spec.schedule_unit,
        mode,
    );
    config.validate()?;
    Ok(config)
}

/// The arms an iterate experiment runs.
pub fn arms(spec: &IterateSpec) -> Vec<(Arm, FilterMode)> {
    match spec.filter_mode {
        FilterMode::None => vec![(Arm::None, FilterMode::None)],
        mode if spec.baseline => vec![(Arm::Filtered, mode), (Arm::None, FilterMode::None)],
        mode => vec![(Arm::Filtered, mode)],
    }
}

pub fn run_iterative(spec: &IterateSpec, seed: u64, reps: u64, options: RunOptions) -> Result<IterateResult> {
    let mut out = Vec::new();
    let mut center = Vec::new();
    for (arm, mode) in arms(spec) {
        let config = arm_config(spec, seed, mode)?;
        center = config.ball.center().iter().copied().collect();
        let rho = effective_rate(&config)?;
        let trajectories = run_replications(reps, options, |rep| {
            let streams = ReplicationStreams::new(seed, rep)?;
            run_retraining(&config, &streams).map_err(|source| Error::Replication {
                replication: rep,
                source,
            })
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let rounds = summarize(&trajectories);
        out.push(ArmResult {
            arm,
            rho,
            rounds,
            trajectories,
        });
    }
    Ok(IterateResult {
        center,
        replications: reps,
        arms: out,
    })
}

fn summarize(trajectories: &[RetrainTrajectory]) -> Vec<RoundSummary> {
    let rounds = trajectories.first().map_or(0, |t| t.records.len());
    (0..rounds)
        .map(|k| {
            let at = |f: &dyn Fn(&verisim_core::linreg::RetrainRecord) -> f64| {
                Estimate::from_values(trajectories.iter().map(|t| f(&t.records[k])))
                    .expect("at least one replication")
            };
            RoundSummary {
                round: k,
                n_k_per_direction: (k > 0).then(|| trajectories[0].records[k].n_k),
                dist_theta_star: at(&|r| r.dist_theta_star),
                dist_center: at(&|r| r.dist_center),
                sq_dist_theta_star: at(&|r| r.dist_theta_star * r.dist_theta_star),
                sq_dist_center: at(&|r| r.dist_center * r.dist_center),
                // the bound is linear in the starting error
                theory_bound: at(&|r| r.bound).mean,
            }
        })
        .collect()
}

/// Per round, `|mean(theta_k) - theta_c|^2` corrected for sampling noise,
/// with its standard error: an estimate of `|E theta_k - theta_c|^2`.
pub fn mean_offset_sq(arm: &ArmResult, center: &[f64]) -> Vec<(f64, f64)> {
    let r = arm.trajectories.len();
    let rounds = arm.rounds.len();
    if r < 2 {
        return Vec::new();
    }
    let c = DVector::from_column_slice(center);
    let rf = r as f64;
    (0..rounds)
        .map(|k| {
            let offsets: Vec<DVector<f64>> = arm
                .trajectories
                .iter()
                .map(|t| &t.records[k].theta_hat - &c)
                .collect();
            let mean = offsets.iter().fold(DVector::zeros(c.len()), |acc, o| acc + o) / rf;
            let mut cov = DMatrix::zeros(c.len(), c.len());
            for o in &offsets {
                let d = o - &mean;
                cov += &d * d.transpose();
            }
            cov /= rf - 1.0;
            let value = mean.norm_squared() - cov.trace() / rf;
            let se = 2.0 * ((mean.transpose() * &cov * &mean)[0].max(0.0) / rf).sqrt();
            (value, se)
        })
        .collect()
}
