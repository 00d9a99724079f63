//! Replication scheduling and experiment-wide draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use verisim_core::linreg::{generate_covariates, CovariateLaw};
use verisim_core::{derive_stream, StreamKey};

use crate::config::{CovariateSpec, DrawScope, ProblemSpec};
use crate::error::{Error, Result};

const OFFSET_SLOT: u64 = 0;
const COVARIATE_SLOT: u64 = 1;

/// Execution settings that never change results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 picks one per core.
    pub threads: usize,
}

/// `f(0), ..., f(reps - 1)` on a worker pool, collected in replication order.
pub fn run_replications<T, F>(reps: u64, options: RunOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads)
        .build()
        .map_err(|e| Error::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..reps).into_par_iter().map(&f).collect()))
}

/// The unit vector `u` with `theta_c = theta_star + delta * u`, shared by
/// every replication and grid cell of an experiment.
pub fn offset_direction(seed: u64, p: usize) -> Result<DVector<f64>> {
    let mut rng = derive_stream(seed, StreamKey::experiment(OFFSET_SLOT))?;
    loop {
        let u = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = u.norm();
        if norm > 1e-8 {
            return Ok(u / norm);
        }
    }
}

/// Experiment-level covariates: the shared `X0` when drawn once per
/// experiment, the fixed matrix, or a reference draw for the theory columns
/// when each replication draws its own.
pub fn reference_covariates(seed: u64, problem: &ProblemSpec) -> Result<DMatrix<f64>> {
    match &problem.covariates {
        CovariateSpec::Fixed(x) => Ok(x.clone()),
        CovariateSpec::StandardNormal(_) => {
            let mut rng = derive_stream(seed, StreamKey::experiment(COVARIATE_SLOT))?;
            Ok(generate_covariates(
                &CovariateLaw::StandardNormal,
                problem.n0,
                problem.dimension(),
                &mut rng,
            )?)
        }
    }
}

/// The covariate law each replication uses, and the reference design.
pub fn covariate_setup(seed: u64, problem: &ProblemSpec) -> Result<(CovariateLaw, DMatrix<f64>)> {
    let reference = reference_covariates(seed, problem)?;
    let law = match &problem.covariates {
        CovariateSpec::StandardNormal(DrawScope::PerReplication) => CovariateLaw::StandardNormal,
        _ => CovariateLaw::Fixed(reference.clone()),
    };
    Ok((law, reference))
}
