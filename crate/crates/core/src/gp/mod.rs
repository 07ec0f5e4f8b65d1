//! Gaussian-process regression with the BART kernel: conditioning, the
//! noise-variance posterior, posterior sampling, metrics, and MAP tuning.

mod fit;
mod linalg;
mod noise;
mod sampling;

pub use fit::{fit_map, FitOptions, FitResult, HyperParams, KernelConfig, LaplaceInfo};
pub use linalg::{condition, EigenCache, Posterior};
pub use noise::{
    noise_logpost, sample_noise_posterior, set_lambda_from_ols, LambdaFit, NoiseDraws, NoisePosterior, NoisePrior,
    NoiseSampler,
};
pub use sampling::{log_loss, matheron_samples, MatheronSampler};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SplitGrid;
use crate::kernel::DepthSchedule;
use crate::kmatrix::{corr_matrix, derive_leaf_moments, KernelMatrixRequest};

/// A fitted model: kernel configuration, hyperparameters and noise prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub grid: SplitGrid,
    pub kernel: KernelConfig,
    pub params: HyperParams,
    pub noise: NoisePrior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictOptions {
    pub n_sigma_draws: usize,
    pub n_f_per_sigma: usize,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self { n_sigma_draws: 1000, n_f_per_sigma: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    /// Posterior mean of `f` at the test points.
    pub mean: DVector<f64>,
    /// Posterior draws of `f`, one row per draw.
    pub samples: DMatrix<f64>,
    /// `σ²` used for each row of `samples`.
    pub sample_sigma2: Vec<f64>,
    pub sigma2_draws: Vec<f64>,
    pub acceptance_rate: f64,
    pub rmse: Option<f64>,
    pub log_loss: Option<f64>,
}

/// Posterior prediction at `x_test`: `σ²` drawn from its posterior given the
/// other hyperparameters, the mean by iterated expectation over those draws,
/// and joint draws of `f` by Matheron's rule. Metrics need `y_test`.
pub fn predict<R: Rng>(
    x_train: &DMatrix<f64>,
    y_train: &DVector<f64>,
    x_test: &DMatrix<f64>,
    model: &GpModel,
    opts: &PredictOptions,
    y_test: Option<&DVector<f64>>,
    rng: &mut R,
) -> Result<PosteriorSummary> {
    let (n, m, p) = (x_train.nrows(), x_test.nrows(), model.grid.dim());
    if y_train.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y_train.len() });
    }
    if x_train.ncols() != p || x_test.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, got: x_test.ncols().min(x_train.ncols()) });
    }
    if let Some(yt) = y_test {
        if yt.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: yt.len() });
        }
    }
    if opts.n_sigma_draws == 0 {
        return Err(crate::error::invalid("need at least one sigma draw"));
    }
    model.params.validate()?;
    let lm = derive_leaf_moments(y_train.as_slice(), model.params.k, 1)?;
    let mut joint_x = DMatrix::zeros(n + m, p);
    joint_x.view_mut((0, 0), (n, p)).copy_from(x_train);
    joint_x.view_mut((n, 0), (m, p)).copy_from(x_test);
    let req = KernelMatrixRequest {
        rows: &joint_x,
        cols: &joint_x,
        grid: &model.grid,
        weights: model.kernel.weights.clone(),
        sched: DepthSchedule::new(model.params.alpha, model.params.beta)?,
        spec: model.kernel.spec.clone(),
        scale: lm.var_total,
        mean_offset: lm.mean_total,
        p0_override: model.kernel.p0_override,
    };
    let joint = corr_matrix(&req)? * lm.var_total;
    let sampler = MatheronSampler::new(&joint, n)?;
    let noise = NoiseSampler::new(NoisePosterior::new(y_train, sampler.train_eigen(), model.noise, lm.mean_total)?)?;
    let draws = noise.sample(opts.n_sigma_draws, rng);
    let resid = y_train.map(|v| v - lm.mean_total);

    let mut mean = DVector::zeros(m);
    for &s2 in &draws.sigma2 {
        mean += sampler.mean(&resid, s2);
    }
    mean /= draws.sigma2.len() as f64;
    mean.add_scalar_mut(lm.mean_total);

    let rows = draws.sigma2.len() * opts.n_f_per_sigma;
    let mut samples = DMatrix::zeros(rows, m);
    let mut sample_sigma2 = Vec::with_capacity(rows);
    for &s2 in &draws.sigma2 {
        for _ in 0..opts.n_f_per_sigma {
            let f = sampler.sample(&resid, s2, rng)?.add_scalar(lm.mean_total);
            samples.row_mut(sample_sigma2.len()).copy_from(&f.transpose());
            sample_sigma2.push(s2);
        }
    }
    let (rmse, ll) = match y_test {
        Some(yt) => {
            let rmse = ((yt - &mean).norm_squared() / m.max(1) as f64).sqrt();
            let ll = if rows > 0 && m > 0 { Some(log_loss(&samples, &sample_sigma2, yt)?) } else { None };
            (Some(rmse), ll)
        }
        None => (None, None),
    };
    Ok(PosteriorSummary {
        mean,
        samples,
        sample_sigma2,
        sigma2_draws: draws.sigma2,
        acceptance_rate: draws.acceptance_rate,
        rmse,
        log_loss: ll,
    })
}
