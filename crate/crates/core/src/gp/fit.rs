use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::noise::NoisePrior;
use crate::error::{invalid, Error, Result};
use crate::grid::{AxisWeights, SplitGrid};
use crate::kernel::{DepthSchedule, TruncationSpec};
use crate::kmatrix::{corr_matrix, cov_grad_at, derive_leaf_moments, KernelMatrixRequest};
use crate::optim::{minimize, BfgsOptions};
use crate::transform::{self as tf, KernelParam};

/// Tunable hyperparameters of the GP limit of BART.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta: f64,
    /// Leaf-scale divisor: prior sd of `f` is `(max y − min y)/(2k)`.
    pub k: f64,
    pub log_sigma2: f64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(invalid(format!("k must be > 0, got {}", self.k)));
        }
        if !self.log_sigma2.is_finite() {
            return Err(Error::NonFinite("log_sigma2"));
        }
        Ok(())
    }

    pub fn sigma2(&self) -> f64 {
        self.log_sigma2.exp()
    }
}

/// Kernel configuration shared by fitting and prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub weights: AxisWeights,
    pub spec: TruncationSpec,
    pub p0_override: bool,
}

impl KernelConfig {
    pub fn reference(p: usize) -> Self {
        Self { weights: AxisWeights::uniform(p), spec: TruncationSpec::reference(), p0_override: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Tune `α` and `β`.
    pub tune_kernel: bool,
    /// Tune `k`.
    pub tune_k: bool,
    pub max_iter: usize,
    /// Finite-difference step in the standard-normal coordinates.
    pub fd_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tune_kernel: true, tune_k: true, max_iter: 200, fd_step: 1e-5 }
    }
}

/// Curvature at the mode in the standard-normal coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceInfo {
    pub names: Vec<String>,
    pub z_mode: Vec<f64>,
    /// Inverse Hessian of the negative log posterior, row-major.
    pub inv_hessian: Vec<Vec<f64>>,
    /// `"finite_difference"`, or `"bfgs"` when the difference Hessian was not
    /// positive definite.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: HyperParams,
    pub laplace: LaplaceInfo,
    /// Log marginal likelihood plus standard-normal log prior at the mode.
    pub objective: f64,
    pub init_objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Coord {
    Alpha,
    Beta,
    LogK,
    Sigma2,
}

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    grid: &'a SplitGrid,
    kernel: &'a KernelConfig,
    prior: &'a NoisePrior,
    init: HyperParams,
    coords: Vec<Coord>,
    mean: f64,
    half_range: f64,
    h: f64,
}

impl Problem<'_> {
    fn params(&self, z: &DVector<f64>) -> HyperParams {
        let mut p = self.init;
        for (c, &v) in self.coords.iter().zip(z.iter()) {
            match c {
                Coord::Alpha => p.alpha = tf::alpha_from_z(v),
                Coord::Beta => p.beta = tf::beta_from_z(v),
                Coord::LogK => p.k = tf::log_k_from_z(v).exp(),
                Coord::Sigma2 => p.log_sigma2 = tf::sigma2_from_z(v, self.prior.nu, self.prior.lambda).ln(),
            }
        }
        p
    }

    fn z_of(&self, p: &HyperParams) -> Result<DVector<f64>> {
        let v = self
            .coords
            .iter()
            .map(|c| match c {
                Coord::Alpha => tf::z_from_alpha(p.alpha),
                Coord::Beta => tf::z_from_beta(p.beta),
                Coord::LogK => Ok(tf::z_from_log_k(p.k.ln())),
                Coord::Sigma2 => tf::z_from_sigma2(p.sigma2(), self.prior.nu, self.prior.lambda),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(v))
    }

    fn request(&self, p: &HyperParams) -> Result<KernelMatrixRequest<'_>> {
        let s = self.half_range / p.k;
        Ok(KernelMatrixRequest {
            rows: self.x,
            cols: self.x,
            grid: self.grid,
            weights: self.kernel.weights.clone(),
            sched: DepthSchedule::new(p.alpha.min(1.0), p.beta)?,
            spec: self.kernel.spec.clone(),
            scale: s * s,
            mean_offset: self.mean,
            p0_override: self.kernel.p0_override,
        })
    }

    /// Objective and its gradient in `z`.
    fn eval(&self, z: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let p = self.params(z);
        let req = self.request(&p)?;
        let n = self.y.len();
        let s2 = p.sigma2();
        let mut kt = corr_matrix(&req)? * req.scale;
        for i in 0..n {
            kt[(i, i)] += s2;
        }
        let chol = kt.cholesky().ok_or_else(|| Error::Numerical("covariance not positive definite".into()))?;
        let r = self.y.map(|v| v - self.mean);
        let a = chol.solve(&r);
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let loglik = -0.5 * r.dot(&a) - 0.5 * logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        let log_prior: f64 = z.iter().map(|v| -0.5 * v * v - 0.5 * (2.0 * std::f64::consts::PI).ln()).sum();
        let kinv = chol.inverse();
        let mut grad = DVector::zeros(z.len());
        for (j, c) in self.coords.iter().enumerate() {
            let g = match c {
                Coord::Sigma2 => {
                    let ds = tf::dsigma2_dz(z[j], self.prior.nu, self.prior.lambda);
                    0.5 * (a.dot(&a) - kinv.trace()) * ds
                }
                _ => {
                    let param = match c {
                        Coord::Alpha => KernelParam::Alpha,
                        Coord::Beta => KernelParam::Beta,
                        _ => KernelParam::LogK,
                    };
                    let dk = cov_grad_at(&req, param, z[j], self.h)?;
                    0.5 * (a.dot(&(&dk * &a)) - kinv.component_mul(&dk).sum())
                }
            };
            grad[j] = g - z[j];
        }
        Ok((loglik + log_prior, grad))
    }
}

/// MAP estimate of the hyperparameters in standard-normal coordinates, by
/// BFGS on the log marginal likelihood plus the log prior.
pub fn fit_map(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &SplitGrid,
    kernel: &KernelConfig,
    prior: &NoisePrior,
    init: &HyperParams,
    opts: &FitOptions,
) -> Result<FitResult> {
    let n = x.nrows();
    if n < 3 {
        return Err(invalid("fit needs at least 3 observations"));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if x.ncols() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: x.ncols() });
    }
    init.validate()?;
    let lm = derive_leaf_moments(y.as_slice(), 1.0, 1)?;
    let mut coords = Vec::new();
    if opts.tune_kernel {
        coords.extend([Coord::Alpha, Coord::Beta]);
    }
    if opts.tune_k {
        coords.push(Coord::LogK);
    }
    coords.push(Coord::Sigma2);
    let prob = Problem {
        x,
        y,
        grid,
        kernel,
        prior,
        init: *init,
        coords,
        mean: lm.mean_total,
        half_range: lm.var_total.sqrt(),
        h: opts.fd_step,
    };
    let z0 = prob.z_of(init)?;
    let (f0, _) = prob.eval(&z0)?;
    let neg = |z: &DVector<f64>| match prob.eval(z) {
        Ok((f, g)) => (-f, -g),
        Err(_) => (f64::NAN, DVector::zeros(z.len())),
    };
    let res = minimize(neg, z0.clone(), &BfgsOptions { max_iter: opts.max_iter, ..BfgsOptions::default() });
    let (z, f) = if -res.f >= f0 { (res.x.clone(), -res.f) } else { (z0, f0) };
    let (_, grad) = prob.eval(&z)?;
    let grad_norm = grad.norm();

    // Hessian of the negative objective by central differences of the gradient
    let k = z.len();
    let h = 1e-4;
    let mut hess = DMatrix::zeros(k, k);
    let mut fd_ok = true;
    for j in 0..k {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[j] += h;
        zm[j] -= h;
        match (prob.eval(&zp), prob.eval(&zm)) {
            (Ok((_, gp)), Ok((_, gm))) => hess.set_column(j, &(-(gp - gm) / (2.0 * h))),
            _ => fd_ok = false,
        }
    }
    let hess = (&hess + hess.transpose()) * 0.5;
    let (inv, source) = match hess.clone().cholesky().filter(|_| fd_ok) {
        Some(c) => (c.inverse(), "finite_difference"),
        None => (res.inv_hessian.clone(), "bfgs"),
    };
    let names = prob
        .coords
        .iter()
        .map(|c| match c {
            Coord::Alpha => "alpha",
            Coord::Beta => "beta",
            Coord::LogK => "log_k",
            Coord::Sigma2 => "sigma2",
        })
        .map(String::from)
        .collect();
    let warning = (!res.converged).then(|| format!("optimizer did not converge: {}", res.message));
    Ok(FitResult {
        params: prob.params(&z),
        laplace: LaplaceInfo {
            names,
            z_mode: z.iter().copied().collect(),
            inv_hessian: inv.row_iter().map(|r| r.iter().copied().collect()).collect(),
            source: source.into(),
        },
        objective: f,
        init_objective: f0,
        grad_norm,
        iterations: res.iterations,
        converged: res.converged,
        warning,
    })
}
