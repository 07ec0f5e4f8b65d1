use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::EigenCache;
use crate::error::{invalid, Error, Result};

/// Pathwise posterior sampler: a joint prior draw corrected by a solve
/// against the observed residual. Both eigendecompositions are computed once.
#[derive(Debug, Clone)]
pub struct MatheronSampler {
    n_train: usize,
    /// `V diag √max(w, 0)` of the joint covariance.
    joint_root: DMatrix<f64>,
    train: EigenCache,
    /// `Σsx U`.
    cross_u: DMatrix<f64>,
}

impl MatheronSampler {
    /// `joint` is the prior covariance over training points followed by test
    /// points.
    pub fn new(joint: &DMatrix<f64>, n_train: usize) -> Result<Self> {
        if !joint.is_square() || n_train > joint.nrows() {
            return Err(invalid("joint covariance must be square with at least n_train rows"));
        }
        let n_all = joint.nrows();
        let je = EigenCache::new(joint)?;
        let joint_root = DMatrix::from_fn(n_all, n_all, |i, j| je.basis[(i, j)] * je.values[j].sqrt());
        let sxx = joint.view((0, 0), (n_train, n_train)).into_owned();
        let train = EigenCache::new(&sxx)?;
        let ssx = joint.view((n_train, 0), (n_all - n_train, n_train));
        let cross_u = ssx * &train.basis;
        Ok(Self { n_train, joint_root, train, cross_u })
    }

    pub fn n_test(&self) -> usize {
        self.joint_root.nrows() - self.n_train
    }

    pub fn train_eigen(&self) -> &EigenCache {
        &self.train
    }

    /// Posterior mean at the test points for fixed `σ²`.
    pub fn mean(&self, resid: &DVector<f64>, sigma2: f64) -> DVector<f64> {
        let c = self.train.rotate(resid).component_mul(&self.train.shifted_inverse_values(sigma2));
        &self.cross_u * c
    }

    /// One draw of the test-point values (prior mean excluded) given the
    /// training residual `y − m(x)`.
    pub fn sample<R: Rng>(&self, resid: &DVector<f64>, sigma2: f64, rng: &mut R) -> Result<DVector<f64>> {
        if resid.len() != self.n_train {
            return Err(Error::DimensionMismatch { expected: self.n_train, got: resid.len() });
        }
        let n_all = self.joint_root.nrows();
        let u = DVector::from_fn(n_all, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f = &self.joint_root * u;
        let sd = sigma2.sqrt();
        let r = DVector::from_fn(self.n_train, |i, _| resid[i] - f[i] - sd * rng.sample::<f64, _>(StandardNormal));
        let correction = self.mean(&r, sigma2);
        Ok(f.rows(self.n_train, n_all - self.n_train) + correction)
    }
}

/// Draws of test values, one row per draw, with `n_per_sigma` draws for each
/// `σ²`. Returns the samples and the `σ²` of each row.
pub fn matheron_samples<R: Rng>(
    joint: &DMatrix<f64>,
    n_train: usize,
    resid: &DVector<f64>,
    sigma2: &[f64],
    n_per_sigma: usize,
    rng: &mut R,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let sampler = MatheronSampler::new(joint, n_train)?;
    let rows = sigma2.len() * n_per_sigma;
    let mut out = DMatrix::zeros(rows, sampler.n_test());
    let mut s_out = Vec::with_capacity(rows);
    for &s2 in sigma2 {
        for _ in 0..n_per_sigma {
            let f = sampler.sample(resid, s2, rng)?;
            out.row_mut(s_out.len()).copy_from(&f.transpose());
            s_out.push(s2);
        }
    }
    Ok((out, s_out))
}

/// Negative mean log predictive density of `y_test`, averaging the Normal
/// error density over samples (rows of `samples`) with log-sum-exp.
pub fn log_loss(samples: &DMatrix<f64>, sigma2: &[f64], y_test: &DVector<f64>) -> Result<f64> {
    let s = samples.nrows();
    if s == 0 {
        return Err(Error::Empty("posterior samples"));
    }
    if sigma2.len() != s {
        return Err(Error::DimensionMismatch { expected: s, got: sigma2.len() });
    }
    if samples.ncols() != y_test.len() {
        return Err(Error::DimensionMismatch { expected: y_test.len(), got: samples.ncols() });
    }
    let nt = y_test.len() as f64;
    let logs: Vec<f64> = (0..s)
        .map(|i| {
            let ss: f64 = samples.row(i).iter().zip(y_test.iter()).map(|(f, y)| (y - f).powi(2)).sum();
            -0.5 * nt * (2.0 * std::f64::consts::PI * sigma2[i]).ln() - ss / (2.0 * sigma2[i])
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical("log predictive density is not finite".into()));
    }
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok(-(max + (sum / s as f64).ln()) / nt)
}
