//! Sample covariance and whitening `Sigma^{-1/2} (r - mean r)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative ridge added to the covariance when its smallest eigenvalue is
/// below `RIDGE * trace / m`.
pub const RIDGE: f64 = 1e-10;

/// Column means of a `reps x m` matrix.
pub fn column_means(rows: &DMatrix<f64>) -> DVector<f64> {
    let n = rows.nrows() as f64;
    DVector::from_iterator(rows.ncols(), rows.column_iter().map(|c| c.sum() / n))
}

/// Unbiased sample covariance of the rows, exactly symmetric.
pub fn covariance(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = rows.shape();
    let mu = column_means(rows);
    let mut centered = rows.clone();
    for (j, mut c) in centered.column_iter_mut().enumerate() {
        c.add_scalar_mut(-mu[j]);
    }
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

pub fn min_eigenvalue(sigma: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sigma.clone()).eigenvalues.min()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    /// `reps x m` whitened rows.
    pub rows: DMatrix<f64>,
    pub min_eigenvalue: f64,
    /// The ridge that was added to the diagonal, if any.
    pub ridge: Option<f64>,
}

/// Whitens `rows` with `sigma`. Near-singular covariances get a small ridge;
/// covariances that are singular to working precision (e.g. two perfectly
/// correlated components) are refused.
pub fn standardize(rows: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<Standardized> {
    let (n, m) = rows.shape();
    if sigma.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: sigma.nrows(),
        });
    }
    if n < 2 || m == 0 {
        return Err(Error::InvalidParameter("standardization needs at least two rows".into()));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("covariance has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let min_eig = eig.eigenvalues.min();
    let max_eig = eig.eigenvalues.max();
    if max_eig <= 0.0 || min_eig <= 64.0 * m as f64 * f64::EPSILON * max_eig {
        return Err(Error::SingularCovariance { min_eigenvalue: min_eig });
    }
    let tau = RIDGE * sigma.trace() / m as f64;
    let ridge = (min_eig < tau).then_some(tau);
    let shift = ridge.unwrap_or(0.0);
    let inv_sqrt = DVector::from_iterator(m, eig.eigenvalues.iter().map(|l| 1.0 / (l + shift).sqrt()));
    let w = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    let mu = column_means(rows);
    let mut centered = rows.clone();
    for (j, mut c) in centered.column_iter_mut().enumerate() {
        c.add_scalar_mut(-mu[j]);
    }
    Ok(Standardized {
        rows: centered * w,
        min_eigenvalue: min_eig,
        ridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSpec;
    use rand_distr::{Distribution, StandardNormal};

    fn correlated(reps: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = SeedSpec::new(seed, 0).rng();
        let z: DMatrix<f64> = DMatrix::from_fn(reps, 3, |_, _| StandardNormal.sample(&mut rng));
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.5, -0.3, 0.2]);
        z * a.transpose()
    }

    #[test]
    fn univariate_reduces_to_z_score() {
        let rows = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 4.0, 8.0, 10.0]);
        let s = standardize(&rows, &covariance(&rows)).unwrap();
        let m = 5.0;
        let sd = ((16.0 + 9.0 + 1.0 + 9.0 + 25.0) / 4.0f64).sqrt();
        for i in 0..5 {
            assert!((s.rows[(i, 0)] - (rows[(i, 0)] - m) / sd).abs() < 1e-14);
        }
    }

    #[test]
    fn whitened_covariance_is_identity() {
        let reps = 4000;
        let rows = correlated(reps, 3);
        let s = standardize(&rows, &covariance(&rows)).unwrap();
        assert!(s.ridge.is_none());
        let c = covariance(&s.rows);
        let tol = 5.0 / (reps as f64).sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((c[(i, j)] - want).abs() < tol);
            }
        }
        assert!(column_means(&s.rows).amax() < 1e-12);
    }

    #[test]
    fn perfectly_correlated_pair_refused() {
        let mut rng = SeedSpec::new(1, 1).rng();
        let col: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rows = DMatrix::from_fn(200, 2, |i, _| col[i]);
        let err = standardize(&rows, &covariance(&rows)).unwrap_err();
        assert!(matches!(err, Error::SingularCovariance { .. }));
    }

    #[test]
    fn near_singular_gets_ridge() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-12]);
        let rows = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1e-6, -1.0, -1e-6]);
        let s = standardize(&rows, &sigma).unwrap();
        assert_eq!(s.ridge, Some(RIDGE * (1.0 + 1e-12) / 2.0));
    }

    #[test]
    fn covariance_is_symmetric() {
        let rows = correlated(500, 9);
        let c = covariance(&rows);
        assert_eq!(c, c.transpose());
        assert!(min_eigenvalue(&c) > -1e-10);
    }
}
