use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Covariates `X` (`n x p`) and responses `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariates: DMatrix<f64>,
    pub responses: DVector<f64>,
}

impl Dataset {
    pub fn new(covariates: DMatrix<f64>, responses: DVector<f64>) -> Result<Self> {
        if covariates.nrows() != responses.len() {
            return Err(Error::DimensionMismatch {
                expected: covariates.nrows(),
                found: responses.len(),
            });
        }
        Ok(Dataset {
            covariates,
            responses,
        })
    }

    pub fn dimension(&self) -> usize {
        self.covariates.ncols()
    }
}

/// What to do when the covariates do not have full column rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankPolicy {
    #[default]
    Strict,
    /// Work in the row space: minimum-norm least squares, and only the
    /// directions with non-zero singular values.
    Subspace,
}

struct Svd {
    u: DMatrix<f64>,
    singular_values: Vec<f64>,
    /// Columns are right singular vectors.
    v: DMatrix<f64>,
}

/// Thin SVD with singular values sorted in descending order.
fn sorted_svd(x: &DMatrix<f64>) -> Svd {
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v requested").transpose();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    Svd {
        u: DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]),
        singular_values: order.iter().map(|&j| s[j]).collect(),
        v: DMatrix::from_fn(v.nrows(), order.len(), |i, j| v[(i, order[j])]),
    }
}

fn numerical_rank(singular_values: &[f64], nrows: usize, ncols: usize) -> usize {
    let largest = singular_values.first().copied().unwrap_or(0.0);
    let tol = nrows.max(ncols) as f64 * f64::EPSILON * largest;
    singular_values.iter().filter(|&&s| s > tol).count()
}

/// Least-squares fit `(X'X)^-1 X'Y` through the SVD of `X`.
pub fn ols_fit(data: &Dataset) -> Result<DVector<f64>> {
    ols_fit_with(data, RankPolicy::Strict)
}

pub fn ols_fit_with(data: &Dataset, policy: RankPolicy) -> Result<DVector<f64>> {
    let (n, p) = data.covariates.shape();
    let svd = sorted_svd(&data.covariates);
    let rank = numerical_rank(&svd.singular_values, n, p);
    if rank < p && policy == RankPolicy::Strict {
        return Err(Error::RankDeficient { rank, expected: p });
    }
    let mut theta = DVector::zeros(p);
    for j in 0..rank {
        let coef = svd.u.column(j).dot(&data.responses) / svd.singular_values[j];
        theta.axpy(coef, &svd.v.column(j), 1.0);
    }
    Ok(theta)
}

/// Singular values `mu_j` (descending) and right singular vectors `v_j` of
/// the real covariates.
///
/// Each `v_j` is signed so that its largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDesign {
    singular_values: DVector<f64>,
    directions: DMatrix<f64>,
}

impl SpectralDesign {
    pub fn new(covariates: &DMatrix<f64>) -> Result<Self> {
        SpectralDesign::with_policy(covariates, RankPolicy::Strict)
    }

    pub fn with_policy(covariates: &DMatrix<f64>, policy: RankPolicy) -> Result<Self> {
        let (n, p) = covariates.shape();
        let svd = sorted_svd(covariates);
        let rank = numerical_rank(&svd.singular_values, n, p);
        if rank < p && policy == RankPolicy::Strict {
            return Err(Error::RankDeficient { rank, expected: p });
        }
        if rank == 0 {
            return Err(Error::RankDeficient { rank, expected: p });
        }
        let mut directions = svd.v.columns(0, rank).into_owned();
        for mut column in directions.column_iter_mut() {
            let lead = column
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if lead < 0.0 {
                column.neg_mut();
            }
        }
        Ok(SpectralDesign {
            singular_values: DVector::from_iterator(rank, svd.singular_values.into_iter().take(rank)),
            directions,
        })
    }

    /// Ambient dimension `p`.
    pub fn dimension(&self) -> usize {
        self.directions.nrows()
    }

    /// Number of directions (the rank).
    pub fn len(&self) -> usize {
        self.directions.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.ncols() == 0
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// Matrix whose columns are the `v_j`.
    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn direction(&self, j: usize) -> DVector<f64> {
        self.directions.column(j).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn identity_design() {
        let x = DMatrix::<f64>::identity(4, 4);
        let y = DVector::from_column_slice(&[1.0, -2.0, 3.0, 0.5]);
        let theta = ols_fit(&Dataset::new(x.clone(), y.clone()).unwrap()).unwrap();
        assert_abs_diff_eq!(theta, y, epsilon = 1e-14);
        let d = SpectralDesign::new(&x).unwrap();
        assert_abs_diff_eq!(
            d.singular_values().clone(),
            DVector::from_element(4, 1.0),
            epsilon = 1e-14
        );
        for j in 0..4 {
            let v = d.direction(j);
            assert_abs_diff_eq!(v.amax(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn diagonal_design_is_sorted() {
        let x = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 3.0, 1.0]));
        let d = SpectralDesign::new(&x).unwrap();
        assert_abs_diff_eq!(
            d.singular_values().clone(),
            DVector::from_column_slice(&[3.0, 2.0, 1.0]),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(d.direction(0)[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn noiseless_fit_recovers_theta() {
        let x = random_matrix(50, 8, 1);
        let theta = DVector::from_fn(8, |i, _| i as f64 - 3.5);
        let fit = ols_fit(&Dataset::new(x.clone(), &x * &theta).unwrap()).unwrap();
        assert_abs_diff_eq!(fit, theta, epsilon = 1e-10);
    }

    #[test]
    fn matches_normal_equations() {
        let x = random_matrix(50, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = DVector::from_fn(50, |_, _| rng.sample(StandardNormal));
        let fit = ols_fit(&Dataset::new(x.clone(), y.clone()).unwrap()).unwrap();
        let brute = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * y;
        assert_abs_diff_eq!(fit, brute, epsilon = 1e-8);
    }

    #[test]
    fn frobenius_identity_and_orthonormality() {
        let x = random_matrix(100, 8, 4);
        let d = SpectralDesign::new(&x).unwrap();
        assert_abs_diff_eq!(
            d.singular_values().norm_squared(),
            x.norm_squared(),
            epsilon = 1e-8
        );
        let gram = d.directions().transpose() * d.directions();
        assert_abs_diff_eq!(gram, DMatrix::identity(8, 8), epsilon = 1e-10);
        let resolution = d.directions() * d.directions().transpose();
        assert_abs_diff_eq!(resolution, DMatrix::identity(8, 8), epsilon = 1e-10);
        let s = d.singular_values();
        assert!(s.iter().zip(s.iter().skip(1)).all(|(a, b)| a >= b));
    }

    #[test]
    fn rank_deficiency() {
        let mut x = random_matrix(20, 3, 5);
        let c0 = x.column(0).into_owned();
        x.set_column(2, &(c0 * 2.0));
        let y = DVector::from_element(20, 1.0);
        let data = Dataset::new(x.clone(), y).unwrap();
        assert!(matches!(
            ols_fit(&data),
            Err(Error::RankDeficient { rank: 2, expected: 3 })
        ));
        assert!(matches!(
            SpectralDesign::new(&x),
            Err(Error::RankDeficient { .. })
        ));
        let fit = ols_fit_with(&data, RankPolicy::Subspace).unwrap();
        assert!(fit.iter().all(|v| v.is_finite()));
        let sub = SpectralDesign::with_policy(&x, RankPolicy::Subspace).unwrap();
        assert_eq!((sub.dimension(), sub.len()), (3, 2));
        assert!(Dataset::new(DMatrix::zeros(3, 2), DVector::zeros(4)).is_err());
    }
}
