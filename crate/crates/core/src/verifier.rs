//! Verifiers and the truncation they induce on synthetic label noise.
//!
//! A [`KnowledgeBall`] accepts a labelled point `(x, y)` when
//! `|y - x.center| <= radius * |x| + slack`. Along a unit direction `v` with
//! generator mean `theta_hat`, a synthetic label `v.theta_hat + sigma * xi`
//! passes exactly when the standardized noise `xi` lies in
//! [`direction_bounds`].

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::special::SQRT_2_OVER_PI;
use crate::truncnorm::{std_moments, Bounds};

/// Unit-norm tolerance for directions used as is.
pub const UNIT_TOLERANCE: f64 = 1e-10;
/// Directions within this distance of unit norm are renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// The verifier's knowledge: a ball of radius `r` around `theta_c`, plus a
/// slack `sigma_c` on the label residual.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBall {
    center: DVector<f64>,
    radius: f64,
    slack: f64,
}

impl KnowledgeBall {
    pub fn new(center: DVector<f64>, radius: f64, slack: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::invalid("radius", "must be finite and non-negative"));
        }
        if !(slack >= 0.0) || !slack.is_finite() {
            return Err(Error::invalid("slack", "must be finite and non-negative"));
        }
        if !(radius + slack > 0.0) {
            return Err(Error::invalid("radius", "radius + slack must be positive"));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("center", "must be a non-empty finite vector"));
        }
        Ok(KnowledgeBall {
            center,
            radius,
            slack,
        })
    }

    /// Ball with the default slack `sqrt(2 / pi) * sigma`, the mean absolute
    /// label noise.
    pub fn with_default_slack(center: DVector<f64>, radius: f64, sigma: f64) -> Result<Self> {
        KnowledgeBall::new(center, radius, default_slack(sigma))
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn slack(&self) -> f64 {
        self.slack
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    /// `r + sigma_c`.
    pub fn half_width(&self) -> f64 {
        self.radius + self.slack
    }
}

/// `sqrt(2 / pi) * sigma`.
pub fn default_slack(sigma: f64) -> f64 {
    SQRT_2_OVER_PI * sigma
}

/// The 1-D verifier: accept `x` when `lower <= x <= upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval1D {
    lower: f64,
    upper: f64,
}

impl Interval1D {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::InvalidBounds { lower, upper });
        }
        Ok(Interval1D { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn midpoint(&self) -> Option<f64> {
        (self.lower.is_finite() && self.upper.is_finite()).then_some(0.5 * (self.lower + self.upper))
    }
}

/// `Delta = |theta_star - theta_c|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifierBias {
    pub delta: f64,
}

impl VerifierBias {
    pub fn new(true_theta: &DVector<f64>, ball: &KnowledgeBall) -> Result<Self> {
        check_dimension(ball, true_theta.len())?;
        Ok(VerifierBias {
            delta: (true_theta - ball.center()).norm(),
        })
    }
}

fn check_dimension(ball: &KnowledgeBall, found: usize) -> Result<()> {
    if ball.dimension() != found {
        return Err(Error::DimensionMismatch {
            expected: ball.dimension(),
            found,
        });
    }
    Ok(())
}

/// Accept `(x, y)` iff `|y - x.center| <= r |x| + sigma_c`; the boundary is accepted.
pub fn verify_point(ball: &KnowledgeBall, x: &DVector<f64>, y: f64) -> Result<bool> {
    check_dimension(ball, x.len())?;
    Ok((y - x.dot(ball.center())).abs() <= ball.radius * x.norm() + ball.slack)
}

/// Standardized truncation of the synthetic label noise along `direction`:
/// `((-(r + sigma_c) + o) / sigma, (r + sigma_c + o) / sigma)` with
/// `o = direction.(theta_c - theta_hat)`.
pub fn direction_bounds(
    ball: &KnowledgeBall,
    direction: &DVector<f64>,
    generator_mean: &DVector<f64>,
    sigma: f64,
) -> Result<Bounds> {
    check_dimension(ball, direction.len())?;
    check_dimension(ball, generator_mean.len())?;
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    let norm = direction.norm();
    let offset = if (norm - 1.0).abs() <= UNIT_TOLERANCE {
        direction.dot(&(ball.center() - generator_mean))
    } else if (norm - 1.0).abs() <= RENORMALIZE_TOLERANCE {
        direction.dot(&(ball.center() - generator_mean)) / norm
    } else {
        return Err(Error::NonUnitDirection { norm });
    };
    let w = ball.half_width();
    Bounds::new((-w + offset) / sigma, (w + offset) / sigma)
}

/// `((a - mean) / sigma, (b - mean) / sigma)`.
pub fn interval_bounds_1d(interval: &Interval1D, generator_mean: f64, sigma: f64) -> Result<Bounds> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    Bounds::new(
        (interval.lower - generator_mean) / sigma,
        (interval.upper - generator_mean) / sigma,
    )
}

/// `rho = m2(-b, b)` with `b = (r + sigma_c) / sigma`.
pub fn contraction_rate(ball: &KnowledgeBall, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    symmetric_variance(ball.half_width() / sigma)
}

/// `m2(-half_width, half_width)`.
pub fn symmetric_variance(half_width: f64) -> Result<f64> {
    Ok(std_moments(Bounds::symmetric(half_width)?)?.m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truncnorm::acceptance_probability;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ball(center: &[f64], r: f64, slack: f64) -> KnowledgeBall {
        KnowledgeBall::new(DVector::from_column_slice(center), r, slack).unwrap()
    }

    fn e1(p: usize) -> DVector<f64> {
        let mut v = DVector::zeros(p);
        v[0] = 1.0;
        v
    }

    #[test]
    fn verify_point_boundary_is_accepted() {
        let b = ball(&[0.0, 0.0], 1.0, 0.0);
        assert!(verify_point(&b, &e1(2), 0.5).unwrap());
        assert!(verify_point(&b, &e1(2), 1.0).unwrap());
        assert!(!verify_point(&b, &e1(2), 1.0 + 1e-9).unwrap());
        assert!(matches!(
            verify_point(&b, &e1(3), 0.0),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn ball_invariants() {
        let c = DVector::from_element(2, 0.0);
        assert!(KnowledgeBall::new(c.clone(), 0.0, 0.0).is_err());
        assert!(KnowledgeBall::new(c.clone(), -1.0, 1.0).is_err());
        assert!(KnowledgeBall::new(c.clone(), f64::INFINITY, 0.0).is_err());
        let b = KnowledgeBall::with_default_slack(c, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(b.slack(), 2.0 * SQRT_2_OVER_PI);
    }

    #[test]
    fn direction_bounds_examples() {
        let b = ball(&[1.0, 2.0], 1.0, 0.0);
        let at_center = direction_bounds(&b, &e1(2), b.center(), 1.0).unwrap();
        assert_eq!((at_center.lower(), at_center.upper()), (-1.0, 1.0));
        // v.(theta_c - theta_hat) = 0.5
        let theta_hat = DVector::from_column_slice(&[0.5, 7.0]);
        let shifted = direction_bounds(&b, &e1(2), &theta_hat, 1.0).unwrap();
        assert_eq!((shifted.lower(), shifted.upper()), (-0.5, 1.5));
    }

    #[test]
    fn direction_bounds_unit_handling() {
        let b = ball(&[0.0, 0.0], 1.0, 0.0);
        let near = DVector::from_column_slice(&[1.0 + 1e-8, 0.0]);
        let got = direction_bounds(&b, &near, &DVector::from_column_slice(&[-1.0, 0.0]), 1.0).unwrap();
        assert_abs_diff_eq!(got.lower(), 0.0, epsilon = 1e-15);
        let far = DVector::from_column_slice(&[1.1, 0.0]);
        assert!(matches!(
            direction_bounds(&b, &far, b.center(), 1.0),
            Err(Error::NonUnitDirection { .. })
        ));
    }

    #[test]
    fn interval_bounds_examples() {
        let all = Interval1D::new(f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let got = interval_bounds_1d(&all, 3.0, 2.0).unwrap();
        assert_eq!(got, Bounds::UNBOUNDED);
        let got = interval_bounds_1d(&Interval1D::new(-1.0, 1.0).unwrap(), 0.0, 1.0).unwrap();
        assert_eq!((got.lower(), got.upper()), (-1.0, 1.0));
        let got = interval_bounds_1d(&Interval1D::new(0.0, 4.0).unwrap(), 1.0, 2.0).unwrap();
        assert_eq!((got.lower(), got.upper()), (-0.5, 1.5));
    }

    #[test]
    fn contraction_rate_examples() {
        let c = DVector::from_element(1, 0.0);
        let rho = |r: f64| contraction_rate(&KnowledgeBall::new(c.clone(), r, 0.0).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(rho(1.0), 0.29112509477279321119, epsilon = 1e-14);
        assert_abs_diff_eq!(rho(0.1), 0.0033288910066998025541, epsilon = 1e-14);
        assert!(rho(12.0) > 1.0 - 1e-12);
        assert!(rho(12.0) <= 1.0);
    }

    #[test]
    fn contraction_rate_monotone() {
        let c = DVector::from_element(1, 0.0);
        let mut last = 0.0;
        for i in 1..60 {
            let r = 0.05 * i as f64;
            let rate = contraction_rate(&KnowledgeBall::new(c.clone(), r, 0.3).unwrap(), 1.0).unwrap();
            assert!(rate > last);
            last = rate;
        }
        let mut last = 1.0;
        // below sigma ~ 0.15 the rate rounds to 1
        for i in 2..60 {
            let sigma = 0.1 * i as f64;
            let rate = contraction_rate(&KnowledgeBall::new(c.clone(), 1.0, 0.3).unwrap(), sigma).unwrap();
            assert!(rate < last);
            last = rate;
        }
    }

    fn random_unit(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
        let v = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        v.normalize()
    }

    #[test]
    fn bounds_match_the_acceptance_event() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = 4;
            let center = DVector::from_fn(p, |_, _| rng.gen_range(-2.0..2.0));
            let b = KnowledgeBall::new(center, rng.gen_range(0.0..2.0), rng.gen_range(0.01..1.0)).unwrap();
            let v = random_unit(&mut rng, p);
            let theta_hat = DVector::from_fn(p, |_, _| rng.gen_range(-2.0..2.0));
            let sigma = rng.gen_range(0.2..3.0);
            let bounds = direction_bounds(&b, &v, &theta_hat, sigma).unwrap();
            for _ in 0..50 {
                let xi: f64 = rng.sample(StandardNormal);
                let y = v.dot(&theta_hat) + sigma * xi;
                // skip draws within rounding distance of the boundary
                let margin = (xi - bounds.lower()).abs().min((xi - bounds.upper()).abs());
                if margin < 1e-9 {
                    continue;
                }
                assert_eq!(verify_point(&b, &v, y).unwrap(), bounds.contains(xi));
            }
            assert_abs_diff_eq!(bounds.width(), 2.0 * b.half_width() / sigma, epsilon = 1e-12);
        }
    }

    #[test]
    fn acceptance_rate_matches_normalizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = 3;
        let b = KnowledgeBall::new(DVector::from_column_slice(&[0.3, -0.2, 0.9]), 0.7, 0.2).unwrap();
        let v = random_unit(&mut rng, p);
        let theta_hat = DVector::from_column_slice(&[1.0, 0.0, -0.5]);
        let sigma = 1.3;
        let prob = acceptance_probability(direction_bounds(&b, &v, &theta_hat, sigma).unwrap()).unwrap();
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| {
                let y = v.dot(&theta_hat) + sigma * rng.sample::<f64, _>(StandardNormal);
                verify_point(&b, &v, y).unwrap()
            })
            .count();
        let rate = hits as f64 / n as f64;
        let se = libm::sqrt(prob * (1.0 - prob) / n as f64);
        assert!((rate - prob).abs() < 5.0 * se, "{rate} vs {prob}");
    }

    #[test]
    fn scale_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let center = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let (r, s) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let resid: f64 = rng.gen_range(-3.0..3.0);
            let c: f64 = rng.gen_range(0.1..10.0);
            let y = x.dot(&center) + resid;
            let scaled_y = x.dot(&center) + c * resid;
            let a = verify_point(&KnowledgeBall::new(center.clone(), r, s).unwrap(), &x, y).unwrap();
            let bb = verify_point(&KnowledgeBall::new(center, c * r, c * s).unwrap(), &x, scaled_y).unwrap();
            let edge = (resid.abs() - (r * x.norm() + s)).abs();
            if edge > 1e-9 {
                assert_eq!(a, bb);
            }
        }
    }

    #[test]
    fn bias_is_center_distance() {
        let b = ball(&[3.0, 4.0], 1.0, 0.0);
        let bias = VerifierBias::new(&DVector::zeros(2), &b).unwrap();
        assert_abs_diff_eq!(bias.delta, 5.0);
    }
}
