use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigendecomposition `C = O D Oᵀ` of a prior covariance, with negative
/// eigenvalues (roundoff) clamped to zero.
#[derive(Debug, Clone)]
pub struct EigenCache {
    pub basis: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl EigenCache {
    pub fn new(c: &DMatrix<f64>) -> Result<Self> {
        if !c.is_square() {
            return Err(Error::DimensionMismatch { expected: c.nrows(), got: c.ncols() });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance matrix"));
        }
        let sym = (c + c.transpose()) * 0.5;
        let e = SymmetricEigen::new(sym);
        let values = e.eigenvalues.map(|v| v.max(0.0));
        Ok(Self { basis: e.eigenvectors, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `O D Oᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.basis[(i, j)] * self.values[j]);
        scaled * self.basis.transpose()
    }

    /// `Oᵀ v`.
    pub fn rotate(&self, v: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(v)
    }

    /// `(C + σ²I)⁻¹ v`, with eigenvalues `d + σ²` below `1e-10·max` treated
    /// as zero when `σ² = 0` (pseudo-inverse).
    pub fn solve_shifted(&self, v: &DVector<f64>, sigma2: f64) -> DVector<f64> {
        let r = self.rotate(v);
        let inv = self.shifted_inverse_values(sigma2);
        &self.basis * r.component_mul(&inv)
    }

    pub(crate) fn shifted_inverse_values(&self, sigma2: f64) -> DVector<f64> {
        let max = self.values.max() + sigma2;
        self.values.map(|d| {
            let s = d + sigma2;
            if s > 1e-10 * max && s > 0.0 {
                1.0 / s
            } else {
                0.0
            }
        })
    }
}

/// Gaussian conditioning of test values on observed training values, using a
/// pseudo-inverse of the training block.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// `Σxx` is the training block, `Σsx` the test-by-training block and `Σss`
/// the test block; `y` holds observed values at the training points.
pub fn condition(
    prior_mean_train: &DVector<f64>,
    prior_mean_test: &DVector<f64>,
    sxx: &DMatrix<f64>,
    ssx: &DMatrix<f64>,
    sss: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<Posterior> {
    let (n, m) = (sxx.nrows(), sss.nrows());
    let checks = [
        (sxx.ncols(), n),
        (ssx.nrows(), m),
        (ssx.ncols(), n),
        (sss.ncols(), m),
        (y.len(), n),
        (prior_mean_train.len(), n),
        (prior_mean_test.len(), m),
    ];
    for (got, expected) in checks {
        if got != expected {
            return Err(Error::DimensionMismatch { expected, got });
        }
    }
    if n == 0 {
        return Ok(Posterior { mean: prior_mean_test.clone(), cov: sss.clone() });
    }
    let eig = EigenCache::new(sxx)?;
    let inv = eig.shifted_inverse_values(0.0);
    // Σsx O diag(inv) Oᵀ
    let so = ssx * &eig.basis;
    let weighted = DMatrix::from_fn(m, n, |i, j| so[(i, j)] * inv[j]);
    let gain = &weighted * eig.basis.transpose();
    let mean = prior_mean_test + &gain * (y - prior_mean_train);
    let mut cov = sss - &gain * ssx.transpose();
    cov = (&cov + cov.transpose()) * 0.5;
    Ok(Posterior { mean, cov })
}
