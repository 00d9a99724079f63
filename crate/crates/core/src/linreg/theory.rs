use nalgebra::DVector;

use super::design::SpectralDesign;
use crate::error::{Error, Result};
use crate::gaussian1d::geometric_bound;
use crate::truncnorm::std_moments;
use crate::verifier::{contraction_rate, direction_bounds, KnowledgeBall};

/// Predicted `E|theta_1 - theta_star|^2` after one verified round with `n1`
/// labels per direction:
/// `sigma^2 * sum_j [m2_j / n1 + m1_j^2 + (m1_j m3_j + m2_j^2) / mu_j^2]`,
/// moments taken on the bounds the verifier induces at `theta_star`.
pub fn one_step_prediction(
    design: &SpectralDesign,
    true_theta: &DVector<f64>,
    ball: &KnowledgeBall,
    sigma: f64,
    n1: u64,
) -> Result<f64> {
    if n1 == 0 {
        return Err(Error::invalid("n1", "must be at least 1"));
    }
    let n1 = n1 as f64;
    let mut total = 0.0;
    for (j, &mu) in design.singular_values().iter().enumerate() {
        let bounds = direction_bounds(ball, &design.direction(j), true_theta, sigma)?;
        let m = std_moments(bounds)?;
        total += m.m2 / n1 + m.m1 * m.m1 + (m.m1 * m.m3 + m.m2 * m.m2) / (mu * mu);
    }
    Ok(sigma * sigma * total)
}

/// `E|theta_0 - theta_star|^2 = sigma^2 * sum_j mu_j^-2`.
pub fn baseline_mse(design: &SpectralDesign, sigma: f64) -> f64 {
    sigma
        * sigma
        * design
            .singular_values()
            .iter()
            .map(|mu| 1.0 / (mu * mu))
            .sum::<f64>()
}

/// `rho^(2k) * initial_sq + p sigma^2 * sum_{j<k} rho^(2(k-j)-1) / n_j` with
/// `rho` the ball's contraction rate and `n_j` per-direction counts.
pub fn long_term_bound(
    ball: &KnowledgeBall,
    sigma: f64,
    p: usize,
    initial_sq: f64,
    schedule: &[u64],
    k: usize,
) -> Result<f64> {
    let rho = contraction_rate(ball, sigma)?;
    geometric_bound(rho, initial_sq, p as f64 * sigma * sigma, schedule, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn diag(values: &[f64]) -> SpectralDesign {
        SpectralDesign::new(&DMatrix::from_diagonal(&DVector::from_column_slice(values))).unwrap()
    }

    #[test]
    fn baseline_examples() {
        assert_abs_diff_eq!(baseline_mse(&diag(&[1.0, 1.0, 1.0]), 1.0), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(baseline_mse(&diag(&[3.0, 2.0, 1.0]), 1.0), 1.3611, epsilon = 1e-4);
    }

    #[test]
    fn unbiased_ball_has_only_even_terms() {
        let design = diag(&[10.0, 8.0, 6.0]);
        let theta = DVector::from_column_slice(&[1.0, 1.0, 1.0]);
        let ball = KnowledgeBall::new(theta.clone(), 1.0, 0.0).unwrap();
        let m2 = 0.29112509477279321119;
        let expected: f64 = [10.0f64, 8.0, 6.0]
            .iter()
            .map(|mu| m2 / 50.0 + m2 * m2 / (mu * mu))
            .sum();
        let got = one_step_prediction(&design, &theta, &ball, 1.0, 50).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-14);
    }

    #[test]
    fn huge_ball_is_the_untruncated_limit() {
        let design = diag(&[10.0, 5.0]);
        let theta = DVector::from_column_slice(&[0.0, 0.0]);
        let mut center = theta.clone();
        center[0] = 0.3;
        let ball = KnowledgeBall::new(center, 60.0, 0.0).unwrap();
        let sigma: f64 = 2.0;
        let got = one_step_prediction(&design, &theta, &ball, sigma, 20).unwrap();
        let expected = sigma * sigma * (2.0 / 20.0 + 1.0 / 100.0 + 1.0 / 25.0);
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn long_term_bound_examples() {
        let ball = KnowledgeBall::new(DVector::zeros(8), 1.0, 0.0).unwrap();
        let sched = [100u64; 40];
        assert_eq!(long_term_bound(&ball, 1.0, 8, 8.0, &sched, 0).unwrap(), 8.0);
        let rho = 0.29112509477279321119f64;
        let direct = libm::pow(rho, 60.0) * 8.0
            + 8.0
                * (0..30)
                    .map(|j| libm::pow(rho, (2 * (30 - j) - 1) as f64) / 100.0)
                    .sum::<f64>();
        assert_abs_diff_eq!(
            long_term_bound(&ball, 1.0, 8, 8.0, &sched, 30).unwrap(),
            direct,
            epsilon = 1e-15
        );
        let limit = 8.0 * rho / (100.0 * (1.0 - rho * rho));
        assert_abs_diff_eq!(
            long_term_bound(&ball, 1.0, 8, 8.0, &sched, 40).unwrap(),
            limit,
            epsilon = 1e-15
        );
    }
}
