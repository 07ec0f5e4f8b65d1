//! Correlation and covariance matrices of the BART kernel.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{AxisWeights, SplitCounts, SplitGrid};
use crate::kernel::{self, chain1, chain2, s_and_w, t_sum, DepthSchedule, TruncationSpec};
use crate::special::DigammaTable;
use crate::transform::{self, KernelParam};

/// Everything needed to fill a kernel matrix. Points are the rows of `rows`
/// and `cols`.
#[derive(Debug, Clone)]
pub struct KernelMatrixRequest<'a> {
    pub rows: &'a DMatrix<f64>,
    pub cols: &'a DMatrix<f64>,
    pub grid: &'a SplitGrid,
    pub weights: AxisWeights,
    pub sched: DepthSchedule,
    pub spec: TruncationSpec,
    /// Total prior variance `m σ_μ²`.
    pub scale: f64,
    /// Total prior mean `m μ_μ`.
    pub mean_offset: f64,
    /// Force `P₀ = 1`.
    pub p0_override: bool,
}

impl<'a> KernelMatrixRequest<'a> {
    /// Reference kernel with uniform weights, unit scale and zero mean.
    pub fn new(rows: &'a DMatrix<f64>, cols: &'a DMatrix<f64>, grid: &'a SplitGrid, sched: DepthSchedule) -> Self {
        Self {
            rows,
            cols,
            grid,
            weights: AxisWeights::uniform(grid.dim()),
            sched,
            spec: TruncationSpec::reference(),
            scale: 1.0,
            mean_offset: 0.0,
            p0_override: false,
        }
    }

    fn effective_schedule(&self) -> DepthSchedule {
        if self.p0_override {
            self.sched.clone().with_root_certain()
        } else {
            self.sched.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.grid.dim();
        for m in [self.rows, self.cols] {
            if m.ncols() != p {
                return Err(Error::DimensionMismatch { expected: p, got: m.ncols() });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("kernel matrix points"));
            }
        }
        if self.weights.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: self.weights.dim() });
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(invalid(format!("scale must be finite and >= 0, got {}", self.scale)));
        }
        Ok(())
    }

    fn is_symmetric(&self) -> bool {
        std::ptr::eq(self.rows, self.cols) || self.rows == self.cols
    }
}

fn point_ranks(grid: &SplitGrid, pts: &DMatrix<f64>, axes: &[usize]) -> Vec<Vec<usize>> {
    pts.row_iter().map(|r| axes.iter().map(|&i| grid.rank(i, r[i])).collect()).collect()
}

/// Correlation matrix; entry `(i, j)` is the kernel at `(rows_i, cols_j)`
/// and equals the scalar [`kernel::pseudo_recursive_corr`] bit for bit.
pub fn corr_matrix(req: &KernelMatrixRequest) -> Result<DMatrix<f64>> {
    req.validate()?;
    let sched = req.effective_schedule();
    let grid = req.grid;
    let w_all = req.weights.as_slice();
    // the same axis filter the scalar path applies
    let axes: Vec<usize> = (0..grid.dim()).filter(|&i| w_all[i] > 0.0 && !grid.axis(i).is_empty()).collect();
    let w: Vec<f64> = axes.iter().map(|&i| w_all[i]).collect();
    let n: Vec<usize> = axes.iter().map(|&i| grid.axis(i).len()).collect();
    let ra = point_ranks(grid, req.rows, &axes);
    let symmetric = req.is_symmetric();
    let rb = if symmetric { ra.clone() } else { point_ranks(grid, req.cols, &axes) };
    let spans = req.spec.spans_from(0)?;
    let probs = sched.table(req.spec.max_depth() + 1);
    let bottom = 1.0 - (1.0 - req.spec.gamma()) * probs[req.spec.max_depth()];
    let closed = spans.iter().all(|&(a, b)| b - a <= 2);
    let psi = DigammaTable::new(n.iter().copied().max().unwrap_or(0) + 1);
    let all_n = grid.n_splits();

    let (nr, nc) = (ra.len(), rb.len());
    let mut out = vec![0.0; nr * nc];
    out.par_chunks_mut(nc.max(1)).enumerate().try_for_each(|(i, row)| -> Result<()> {
        let p = axes.len();
        let (mut lo, mut n0, mut hi) = (vec![0; p], vec![0; p], vec![0; p]);
        let start = if symmetric { i } else { 0 };
        for j in start..nc {
            let mut sep = false;
            for a in 0..p {
                let (x, y) = (ra[i][a], rb[j][a]);
                let (l, h) = if x <= y { (x, y) } else { (y, x) };
                lo[a] = l;
                n0[a] = h - l;
                hi[a] = n[a] - h;
                sep |= h > l;
            }
            row[j] = if !sep {
                1.0
            } else if closed {
                let (s, tot) = s_and_w(&lo, &n0, &hi, &w);
                let t = t_sum(&lo, &n0, &hi, &w, s, tot, &|k| psi.get(k));
                let (s, t) = (s / tot, t / tot);
                let mut v = bottom;
                for &(a, b) in spans.iter().rev() {
                    v = if b - a == 2 { chain2(probs[a], probs[a + 1], v, s, t) } else { chain1(probs[a], v, s) };
                }
                v
            } else {
                let x = grid_ranks_full(grid, req.rows, i);
                let y = grid_ranks_full(grid, req.cols, j);
                let c = SplitCounts::from_ranks(&x, &y, &all_n);
                kernel::pseudo_recursive_corr(&c, &req.weights, &sched, 0, &req.spec)?
            };
        }
        Ok(())
    })?;
    let mut m = DMatrix::from_row_slice(nr, nc, &out);
    if symmetric {
        for i in 0..nr {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
    }
    Ok(m)
}

fn grid_ranks_full(grid: &SplitGrid, pts: &DMatrix<f64>, i: usize) -> Vec<usize> {
    (0..grid.dim()).map(|a| grid.rank(a, pts[(i, a)])).collect()
}

/// `scale · corr_matrix`.
pub fn cov_matrix(req: &KernelMatrixRequest) -> Result<DMatrix<f64>> {
    Ok(corr_matrix(req)? * req.scale)
}

/// Leaf prior moments summed over the `m` trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafMoments {
    pub m: usize,
    /// `m μ_μ = (max y + min y)/2`.
    pub mean_total: f64,
    /// `m σ_μ² = ((max y − min y)/(2k))²`.
    pub var_total: f64,
    /// Set when `y` is constant, so the prior variance is zero.
    pub degenerate: bool,
}

impl LeafMoments {
    pub fn mu_mu(&self) -> f64 {
        self.mean_total / self.m as f64
    }

    pub fn sigma_mu(&self) -> f64 {
        (self.var_total / self.m as f64).sqrt()
    }
}

pub fn derive_leaf_moments(y: &[f64], k: f64, m: usize) -> Result<LeafMoments> {
    if y.is_empty() {
        return Err(Error::Empty("outcome vector"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("outcome vector"));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid(format!("k must be finite and > 0, got {k}")));
    }
    if m == 0 {
        return Err(invalid("number of trees must be >= 1"));
    }
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let half_range = (max - min) / (2.0 * k);
    Ok(LeafMoments {
        m,
        mean_total: (max + min) / 2.0,
        var_total: half_range * half_range,
        degenerate: max == min,
    })
}

/// Central difference of [`cov_matrix`] with respect to the standard-normal
/// coordinate of `param` (see [`crate::transform`]); `step` defaults to 1e-5.
pub fn matrix_grad_fd(req: &KernelMatrixRequest, param: KernelParam, step: Option<f64>) -> Result<DMatrix<f64>> {
    let h = step.unwrap_or(1e-5);
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("step must be finite and > 0, got {h}")));
    }
    req.validate()?;
    let z = match param {
        KernelParam::Alpha => transform::z_from_alpha(req.sched.alpha())?,
        KernelParam::Beta => transform::z_from_beta(req.sched.beta())?,
        KernelParam::LogK => 0.0,
    };
    cov_grad_at(req, param, z, h)
}

/// Central difference in the standard-normal coordinate of `param`, taken
/// at coordinate `z`; the other parameters come from `req`.
pub(crate) fn cov_grad_at(req: &KernelMatrixRequest, param: KernelParam, z: f64, h: f64) -> Result<DMatrix<f64>> {
    match param {
        KernelParam::LogK => {
            // log k = log 2 + 2z and scale ∝ k⁻², so scale(z ± h) = scale·e^{∓4h}
            let c = corr_matrix(req)?;
            let d = transform::LOG_K_SD * 2.0;
            Ok(c * (req.scale * ((-d * h).exp() - (d * h).exp()) / (2.0 * h)))
        }
        KernelParam::Alpha | KernelParam::Beta => {
            let (a, b) = (req.sched.alpha(), req.sched.beta());
            let at = |z: f64| -> Result<DMatrix<f64>> {
                let sched = match param {
                    KernelParam::Alpha => req.sched.with_params(transform::alpha_from_z(z), b)?,
                    _ => req.sched.with_params(a, transform::beta_from_z(z))?,
                };
                cov_matrix(&KernelMatrixRequest { sched, ..req.clone() })
            };
            Ok((at(z + h)? - at(z - h)?) / (2.0 * h))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_moments() {
        let lm = derive_leaf_moments(&[-1.0, 0.3, 1.0], 2.0, 200).unwrap();
        assert_eq!((lm.mean_total, lm.var_total, lm.degenerate), (0.0, 0.25, false));
        let lm = derive_leaf_moments(&[0.0, 1.0], 2.0, 1).unwrap();
        assert_eq!((lm.mean_total, lm.var_total), (0.5, 1.0 / 16.0));
        let lm = derive_leaf_moments(&[-1.0, 1.0], 0.5, 1).unwrap();
        assert_eq!(lm.var_total, 4.0);
        let lm = derive_leaf_moments(&[3.0, 3.0], 2.0, 1).unwrap();
        assert!(lm.degenerate && lm.var_total == 0.0);
        assert!(derive_leaf_moments(&[], 2.0, 1).is_err());
    }

    fn sample_points() -> (DMatrix<f64>, SplitGrid) {
        let x = DMatrix::from_row_slice(4, 2, &[0.1, 0.9, 0.4, 0.2, 0.75, 0.5, 0.33, 0.66]);
        (x, SplitGrid::unit_uniform(2, 9))
    }

    #[test]
    fn scale_and_diagonal() {
        let (x, g) = sample_points();
        let s = DepthSchedule::new(0.95, 2.0).unwrap();
        let mut req = KernelMatrixRequest::new(&x, &x, &g, s);
        let c = corr_matrix(&req).unwrap();
        assert!(c.diagonal().iter().all(|&v| v == 1.0));
        assert_eq!(c, c.transpose());
        req.scale = 2.5;
        assert_eq!(cov_matrix(&req).unwrap(), &c * 2.5);
        req.scale = 0.0;
        assert!(cov_matrix(&req).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fd_gradient_shapes() {
        let (x, g) = sample_points();
        let s = DepthSchedule::new(0.9, 1.5).unwrap();
        let req = KernelMatrixRequest::new(&x, &x, &g, s);
        let da = matrix_grad_fd(&req, KernelParam::Alpha, None).unwrap();
        assert!(da.diagonal().iter().all(|v| v.abs() < 1e-9));
        let dk = matrix_grad_fd(&req, KernelParam::LogK, None).unwrap();
        let c = corr_matrix(&req).unwrap();
        assert!((dk[(0, 1)] + 4.0 * c[(0, 1)]).abs() < 1e-8);
        let edge = KernelMatrixRequest { sched: DepthSchedule::new(1.0, 2.0).unwrap(), ..req.clone() };
        assert!(matrix_grad_fd(&edge, KernelParam::Alpha, None).is_err());
    }
}
