//! Mean estimation of `N(mu, sigma^2)` when each round refits on the
//! generator's own samples, keeping only those an interval verifier accepts.
//!
//! With standardized bounds `(alpha, beta)` of the interval and standardized
//! generator mean `x`, one round moves `x` to `x + mean(xi_1..xi_n)` where the
//! `xi_i` are standard normal truncated to `(alpha - x, beta - x)`. Its
//! expected value is the map `T(x) = x + m1(alpha - x, beta - x)`, whose
//! derivative is `m2(alpha - x, beta - x)`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::stream::ReplicationStreams;
use crate::truncnorm::{acceptance_probability, std_moments, Bounds, TruncatedSampler};
use crate::verifier::{interval_bounds_1d, symmetric_variance, Interval1D};
use crate::{FilterMode, MAX_ATTEMPTS_PER_SAMPLE};

/// Direction of a level crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    /// First round with mean `<= level`.
    Below,
    /// First round with mean `>= level`.
    Above,
}

/// Stop a run early once the mean crosses `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub level: f64,
    pub crossing: Crossing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian1DConfig {
    pub true_mean: f64,
    pub sigma: f64,
    pub interval: Interval1D,
    pub n0: u64,
    /// `n_k` for rounds `0..rounds`; round `k` turns the estimate `k` into `k + 1`.
    pub schedule: Schedule,
    pub filter_mode: FilterMode,
    pub stop: Option<StopRule>,
}

impl Gaussian1DConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", "must be finite and positive"));
        }
        if !self.true_mean.is_finite() {
            return Err(Error::invalid("true_mean", "must be finite"));
        }
        if self.n0 == 0 {
            return Err(Error::invalid("n0", "must be at least 1"));
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.schedule.rounds()
    }

    /// The interval in standardized units, `((a - mu) / sigma, (b - mu) / sigma)`.
    pub fn standardized_bounds(&self) -> Result<Bounds> {
        interval_bounds_1d(&self.interval, self.true_mean, self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record1D {
    pub round: usize,
    /// Real-data count `n0` at round 0, `n_{k-1}` afterwards.
    pub n_k: u64,
    pub mean: f64,
    /// `(mean - mu) / sigma`.
    pub standardized_error: f64,
    /// `|mean - (a + b) / 2|`; `None` for unbounded intervals.
    pub dist_midpoint: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory1D {
    pub records: Vec<Record1D>,
}

impl Trajectory1D {
    pub fn means(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.mean)
    }
}

/// Mean of `n0` draws from `N(mu, sigma^2)`.
pub fn initial_mean<R: Rng + ?Sized>(config: &Gaussian1DConfig, rng: &mut R) -> Result<f64> {
    config.validate()?;
    let total: f64 = (0..config.n0).map(|_| rng.sample::<f64, _>(StandardNormal)).sum();
    Ok(config.true_mean + config.sigma * (total / config.n0 as f64))
}

/// `current + sigma * mean(n draws from the standard normal truncated to bounds)`.
///
/// Linear-regression retraining uses this same routine per direction, so the
/// two stay interchangeable draw for draw.
pub fn truncated_step<R: Rng + ?Sized>(
    current: f64,
    sigma: f64,
    bounds: Bounds,
    n: u64,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n_k", "must be at least 1"));
    }
    let sampler = TruncatedSampler::new(bounds)?;
    let total = sampler.sum(n as usize, rng);
    Ok(current + sigma * (total / n as f64))
}

/// `current + sigma * mean(n standard normals)`.
pub fn unfiltered_step<R: Rng + ?Sized>(current: f64, sigma: f64, n: u64, rng: &mut R) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n_k", "must be at least 1"));
    }
    let total: f64 = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).sum();
    Ok(current + sigma * (total / n as f64))
}

/// Mean of the first `n` draws of `N(current, sigma^2)` that `accept` keeps.
pub fn rejection_step<R, F>(current: f64, sigma: f64, n: u64, mut accept: F, rng: &mut R) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> Result<bool>,
{
    if n == 0 {
        return Err(Error::invalid("n_k", "must be at least 1"));
    }
    let mut total = 0.0;
    for _ in 0..n {
        let mut attempts = 0u64;
        loop {
            if attempts == MAX_ATTEMPTS_PER_SAMPLE {
                return Err(Error::MaxAttemptsExceeded { attempts });
            }
            attempts += 1;
            let y = current + sigma * rng.sample::<f64, _>(StandardNormal);
            if accept(y)? {
                total += y;
                break;
            }
        }
    }
    Ok(total / n as f64)
}

/// One retraining round from `current_mean` with `n_k` kept samples.
pub fn retrain_step<R: Rng + ?Sized>(
    current_mean: f64,
    config: &Gaussian1DConfig,
    n_k: u64,
    rng: &mut R,
) -> Result<f64> {
    let sigma = config.sigma;
    match config.filter_mode {
        FilterMode::Direct => {
            let bounds = interval_bounds_1d(&config.interval, current_mean, sigma)?;
            truncated_step(current_mean, sigma, bounds, n_k, rng)
        }
        FilterMode::Reject => {
            let bounds = interval_bounds_1d(&config.interval, current_mean, sigma)?;
            acceptance_probability(bounds)?;
            let interval = config.interval;
            rejection_step(current_mean, sigma, n_k, |y| Ok(interval.contains(y)), rng)
        }
        FilterMode::None => unfiltered_step(current_mean, sigma, n_k, rng),
    }
}

/// Real-data mean followed by up to `rounds` retraining steps.
///
/// Round `k` draws from `streams.synthetic(k, 0)`; the real data come from
/// `streams.real_data()`. A configured [`StopRule`] ends the run at the
/// first crossing.
pub fn run_iterations(config: &Gaussian1DConfig, streams: &ReplicationStreams) -> Result<Trajectory1D> {
    config.validate()?;
    let midpoint = config.interval.midpoint();
    let record = |round: usize, n_k: u64, mean: f64| Record1D {
        round,
        n_k,
        mean,
        standardized_error: (mean - config.true_mean) / config.sigma,
        dist_midpoint: midpoint.map(|m| (mean - m).abs()),
    };
    let mut mean = initial_mean(config, &mut streams.real_data()?)?;
    let mut records = Vec::with_capacity(config.rounds() + 1);
    records.push(record(0, config.n0, mean));
    let stopped = |mean: f64| {
        config.stop.is_some_and(|s| match s.crossing {
            Crossing::Below => mean <= s.level,
            Crossing::Above => mean >= s.level,
        })
    };
    if stopped(mean) {
        return Ok(Trajectory1D { records });
    }
    for (k, n_k) in config.schedule.counts().into_iter().enumerate() {
        let mut rng = streams.synthetic(k, 0).map_err(|e| e.at_round(k, None))?;
        mean = retrain_step(mean, config, n_k, &mut rng).map_err(|e| e.at_round(k, None))?;
        records.push(record(k + 1, n_k, mean));
        if stopped(mean) {
            break;
        }
    }
    Ok(Trajectory1D { records })
}

/// One-round MSE of the retrained mean in units of `sigma^2`:
/// `m2 / n1 + m1^2 + (m2^2 + m3 m1) / n0`, moments at the standardized
/// interval `bounds`.
///
/// The approximation is proved for `n1 > n0 >= 100`; outside that regime
/// it is still returned, with a logged warning.
pub fn one_step_mse_prediction_1d(bounds: Bounds, n0: u64, n1: u64) -> Result<f64> {
    if n0 == 0 || n1 == 0 {
        return Err(Error::invalid("n", "sample counts must be at least 1"));
    }
    if !(n1 > n0 && n0 >= 100) {
        log::warn!("one-step prediction used outside n1 > n0 >= 100 (n0 = {n0}, n1 = {n1})");
    }
    let m = std_moments(bounds)?;
    let (n0, n1) = (n0 as f64, n1 as f64);
    Ok(m.m2 / n1 + m.m1 * m.m1 + (m.m2 * m.m2 + m.m3 * m.m1) / n0)
}

/// `rho^(2k) * initial + scale * sum_{j<k} rho^(2(k-j)-1) / n_j`.
///
/// `rho = 1` gives the plain variance accumulation of unfiltered retraining.
pub fn geometric_bound(rho: f64, initial: f64, scale: f64, schedule: &[u64], k: usize) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid("rho", "must lie in (0, 1]"));
    }
    if schedule.len() < k {
        return Err(Error::InsufficientRounds {
            needed: k,
            found: schedule.len(),
        });
    }
    if schedule[..k].contains(&0) {
        return Err(Error::invalid("schedule", "counts must be at least 1"));
    }
    let rho2 = rho * rho;
    // s_{j+1} = rho^2 s_j + rho / n_j
    let noise = schedule[..k].iter().fold(0.0, |s, &n| rho2 * s + rho / n as f64);
    Ok(libm::pow(rho2, k as f64) * initial + scale * noise)
}

/// Long-run bound on `E(X_k - (a + b) / 2)^2` in units of `sigma^2`:
/// `rho^(2k) * initial_sq_error + sum_{j<k} rho^(2(k-j)-1) / n_j`.
pub fn long_term_bound_1d(rho: f64, initial_sq_error: f64, schedule: &[u64], k: usize) -> Result<f64> {
    geometric_bound(rho, initial_sq_error, 1.0, schedule, k)
}

/// `rho = m2(-w, w)` with `w` the standardized half-width of a finite interval.
pub fn contraction_rate_1d(bounds: Bounds) -> Result<f64> {
    if !bounds.is_finite() {
        return Err(Error::invalid("bounds", "contraction needs a finite interval"));
    }
    symmetric_variance(0.5 * bounds.width())
}

/// `T(x) = x + m1(alpha - x, beta - x)`.
pub fn drift_map(bounds: Bounds, x: f64) -> Result<f64> {
    Ok(x + std_moments(bounds.shifted(x)?)?.m1)
}

/// `v(x) = m2(alpha - x, beta - x)`, the derivative of [`drift_map`].
pub fn conditional_variance(bounds: Bounds, x: f64) -> Result<f64> {
    Ok(std_moments(bounds.shifted(x)?)?.m2)
}

/// First round at which the mean crosses `level`, if any.
pub fn hitting_time(trajectory: &Trajectory1D, level: f64, crossing: Crossing) -> Option<usize> {
    trajectory
        .records
        .iter()
        .find(|r| match crossing {
            Crossing::Below => r.mean <= level,
            Crossing::Above => r.mean >= level,
        })
        .map(|r| r.round)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(a: f64, b: f64, mode: FilterMode) -> Gaussian1DConfig {
        Gaussian1DConfig {
            true_mean: 0.0,
            sigma: 1.0,
            interval: Interval1D::new(a, b).unwrap(),
            n0: 100,
            schedule: Schedule::fixed(100, 20).unwrap(),
            filter_mode: mode,
            stop: None,
        }
    }

    fn trajectory(means: &[f64]) -> Trajectory1D {
        Trajectory1D {
            records: means
                .iter()
                .enumerate()
                .map(|(round, &mean)| Record1D {
                    round,
                    n_k: 1,
                    mean,
                    standardized_error: mean,
                    dist_midpoint: None,
                })
                .collect(),
        }
    }

    #[test]
    fn initial_mean_examples() {
        let mut c = config(-1.0, 1.0, FilterMode::Direct);
        c.true_mean = 3.5;
        c.sigma = 1e-12;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_abs_diff_eq!(initial_mean(&c, &mut rng).unwrap(), 3.5, epsilon = 1e-9);

        let mut c = config(-1.0, 1.0, FilterMode::Direct);
        c.n0 = 1_000_000;
        let m = initial_mean(&c, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(m.abs() < 5e-3);
        let again = initial_mean(&c, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(m.to_bits(), again.to_bits());
    }

    #[test]
    fn symmetric_interval_keeps_the_mean_on_average() {
        let c = config(-1.0, 3.0, FilterMode::Direct);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reps = 20_000;
        let total: f64 = (0..reps)
            .map(|_| retrain_step(1.0, &c, 10, &mut rng).unwrap())
            .sum();
        // sd of one step is sqrt(m2(-2, 2) / 10) < 0.3
        assert!((total / reps as f64 - 1.0).abs() < 5.0 * 0.3 / libm::sqrt(reps as f64));
    }

    #[test]
    fn one_sided_interval_pushes_down() {
        let c = config(f64::NEG_INFINITY, 0.5, FilterMode::Direct);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reps = 5000;
        let total: f64 = (0..reps)
            .map(|_| retrain_step(0.0, &c, 20, &mut rng).unwrap())
            .sum();
        let expected = drift_map(Bounds::new(f64::NEG_INFINITY, 0.5).unwrap(), 0.0).unwrap();
        assert!(expected < 0.0);
        assert!(total / (reps as f64) < 0.0);
        let se = 1.0 / libm::sqrt(20.0 * reps as f64);
        assert!((total / reps as f64 - expected).abs() < 5.0 * se);
    }

    #[test]
    fn reject_mode_gives_up_on_hopeless_intervals() {
        let c = config(6.0, 6.0001, FilterMode::Reject);
        let err = retrain_step(0.0, &c, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap_err();
        assert!(matches!(err, Error::MaxAttemptsExceeded { .. }));
    }

    #[test]
    fn run_iterations_records_every_round() {
        let mut c = config(-1.0, 1.0, FilterMode::Direct);
        let streams = ReplicationStreams::new(7, 0).unwrap();
        let t = run_iterations(&c, &streams).unwrap();
        assert_eq!(t.records.len(), 21);
        assert_eq!(t.records[0].n_k, 100);
        assert_eq!(t.records[0].round, 0);
        assert_eq!(t, run_iterations(&c, &streams).unwrap());

        c.schedule = Schedule::fixed(10, 0).unwrap();
        let t = run_iterations(&c, &streams).unwrap();
        assert_eq!(t.records.len(), 1);
    }

    #[test]
    fn stop_rule_ends_the_run() {
        let mut c = config(f64::NEG_INFINITY, 1.0, FilterMode::Direct);
        c.n0 = 50;
        c.schedule = Schedule::fixed(1, 5000).unwrap();
        c.stop = Some(StopRule {
            level: -3.0,
            crossing: Crossing::Below,
        });
        let t = run_iterations(&c, &ReplicationStreams::new(1, 0).unwrap()).unwrap();
        let last = t.records.last().unwrap();
        assert!(last.mean <= -3.0);
        assert_eq!(hitting_time(&t, -3.0, Crossing::Below), Some(last.round));
    }

    #[test]
    fn one_step_prediction_examples() {
        let p = one_step_mse_prediction_1d(Bounds::new(-1.0, 1.0).unwrap(), 100, 1000).unwrap();
        let m2 = 0.29112509477279321119;
        assert_abs_diff_eq!(p, m2 / 1000.0 + m2 * m2 / 100.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p, 1.139e-3, epsilon = 1e-6);
        let p = one_step_mse_prediction_1d(Bounds::UNBOUNDED, 100, 200).unwrap();
        assert_abs_diff_eq!(p, 1.0 / 200.0 + 1.0 / 100.0, epsilon = 1e-15);
    }

    #[test]
    fn long_term_bound_examples() {
        let sched = [100u64; 10];
        assert_eq!(long_term_bound_1d(0.5, 2.0, &sched, 0).unwrap(), 2.0);
        let direct: f64 = libm::pow(0.25, 10.0)
            + (0..10)
                .map(|j| libm::pow(0.5, (2 * (10 - j) - 1) as f64) / 100.0)
                .sum::<f64>();
        let got = long_term_bound_1d(0.5, 1.0, &sched, 10).unwrap();
        assert_abs_diff_eq!(got, direct, epsilon = 1e-15);
        assert_abs_diff_eq!(got, 6.66e-3, epsilon = 1e-5);

        let long = [50u64; 400];
        let rho: f64 = 0.7;
        let limit = rho / (50.0 * (1.0 - rho * rho));
        assert_abs_diff_eq!(
            long_term_bound_1d(rho, 3.0, &long, 400).unwrap(),
            limit,
            epsilon = 1e-12
        );

        assert!(long_term_bound_1d(0.0, 1.0, &sched, 3).is_err());
        assert!(long_term_bound_1d(0.5, 1.0, &sched, 11).is_err());
    }

    #[test]
    fn scaled_bound_with_unit_rate_accumulates_variance() {
        let sched = [10u64, 20, 40];
        let got = geometric_bound(1.0, 2.0, 8.0, &sched, 3).unwrap();
        assert_abs_diff_eq!(got, 2.0 + 8.0 * (0.1 + 0.05 + 0.025), epsilon = 1e-14);
    }

    #[test]
    fn hitting_time_examples() {
        assert_eq!(hitting_time(&trajectory(&[0.0; 5]), -10.0, Crossing::Below), None);
        assert_eq!(
            hitting_time(&trajectory(&[0.0, -5.0, -12.0]), -10.0, Crossing::Below),
            Some(2)
        );
        assert_eq!(
            hitting_time(&trajectory(&[0.0, 5.0, 12.0]), 10.0, Crossing::Above),
            Some(2)
        );
    }

    #[test]
    fn midpoint_is_the_fixed_point() {
        for (a, b) in [(-1.0, 1.0), (0.5, 3.0), (-7.0, -2.5), (10.0, 10.5)] {
            let bounds = Bounds::new(a, b).unwrap();
            let mid = 0.5 * (a + b);
            assert!(
                (drift_map(bounds, mid).unwrap() - mid).abs() < 1e-12,
                "({a}, {b})"
            );
        }
    }
}
