//! Sampler for the BART tree prior and the covariance cross-check built on it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{count_splits, AxisWeights, SplitGrid};
use crate::kernel::{self, DepthSchedule, DEFAULT_BUDGET};

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf(f64),
    Split {
        axis: usize,
        /// Index of the cutpoint in the full grid axis.
        cut: usize,
        cutpoint: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

/// Tree prior: grid, split probabilities, split-variable weights, and the
/// per-tree leaf distribution `N(μ_μ, σ_μ²)`.
#[derive(Debug, Clone)]
pub struct TreePrior<'a> {
    pub grid: &'a SplitGrid,
    pub sched: &'a DepthSchedule,
    pub weights: &'a AxisWeights,
    pub leaf_mean: f64,
    pub leaf_sd: f64,
}

impl TreePrior<'_> {
    fn validate(&self) -> Result<()> {
        if self.weights.dim() != self.grid.dim() {
            return Err(Error::DimensionMismatch { expected: self.grid.dim(), got: self.weights.dim() });
        }
        if !(self.leaf_sd >= 0.0 && self.leaf_sd.is_finite() && self.leaf_mean.is_finite()) {
            return Err(invalid("leaf moments must be finite with sd >= 0"));
        }
        Ok(())
    }
}

/// Random stream for tree `tree` of prior draw `sample`.
pub fn tree_rng(seed: u64, sample: u64, m_trees: u64, tree: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample.wrapping_mul(m_trees).wrapping_add(tree));
    rng
}

pub fn sample_tree<R: Rng>(prior: &TreePrior, rng: &mut R) -> Result<TreeNode> {
    prior.validate()?;
    let mut ranges: Vec<(usize, usize)> = prior.grid.axes().iter().map(|a| (0, a.len())).collect();
    Ok(grow(prior, &mut ranges, 0, rng))
}

fn grow<R: Rng>(prior: &TreePrior, ranges: &mut [(usize, usize)], d: usize, rng: &mut R) -> TreeNode {
    let w = prior.weights.as_slice();
    let avail: f64 = (0..ranges.len()).filter(|&i| w[i] > 0.0 && ranges[i].1 > ranges[i].0).map(|i| w[i]).sum();
    let leaf = |rng: &mut R| {
        let z: f64 = rng.sample(StandardNormal);
        TreeNode::Leaf(prior.leaf_mean + prior.leaf_sd * z)
    };
    if avail == 0.0 {
        return leaf(rng);
    }
    let pd = prior.sched.prob(d);
    if !(rng.gen::<f64>() < pd) {
        return leaf(rng);
    }
    let mut u = rng.gen::<f64>() * avail;
    let mut axis = usize::MAX;
    for i in 0..ranges.len() {
        if w[i] > 0.0 && ranges[i].1 > ranges[i].0 {
            axis = i;
            if u < w[i] {
                break;
            }
            u -= w[i];
        }
    }
    let (lo, hi) = ranges[axis];
    let cut = rng.gen_range(lo..hi);
    ranges[axis] = (lo, cut);
    let left = grow(prior, ranges, d + 1, rng);
    ranges[axis] = (cut + 1, hi);
    let right = grow(prior, ranges, d + 1, rng);
    ranges[axis] = (lo, hi);
    TreeNode::Split {
        axis,
        cut,
        cutpoint: prior.grid.axis(axis)[cut],
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Value of the tree at `x`; a split at `s` sends `x_axis <= s` left.
pub fn eval_tree(tree: &TreeNode, x: &[f64]) -> f64 {
    let mut node = tree;
    loop {
        match node {
            TreeNode::Leaf(v) => return *v,
            TreeNode::Split { axis, cutpoint, left, right, .. } => {
                node = if x[*axis] <= *cutpoint { left } else { right };
            }
        }
    }
}

/// Whether `x` and `x2` reach the same leaf.
pub fn same_leaf(tree: &TreeNode, x: &[f64], x2: &[f64]) -> bool {
    let mut node = tree;
    loop {
        match node {
            TreeNode::Leaf(_) => return true,
            TreeNode::Split { axis, cutpoint, left, right, .. } => {
                let a = x[*axis] <= *cutpoint;
                if a != (x2[*axis] <= *cutpoint) {
                    return false;
                }
                node = if a { left } else { right };
            }
        }
    }
}

/// One draw of `f = Σ_j g(·; T_j, M_j)` at the rows of `x`, using streams
/// `(sample, 0..m_trees)` of `seed`.
pub fn sample_prior_f(x: &DMatrix<f64>, m_trees: usize, prior: &TreePrior, seed: u64, sample: u64) -> Result<DVector<f64>> {
    prior.validate()?;
    if x.ncols() != prior.grid.dim() {
        return Err(Error::DimensionMismatch { expected: prior.grid.dim(), got: x.ncols() });
    }
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut f = DVector::zeros(x.nrows());
    for j in 0..m_trees {
        let mut rng = tree_rng(seed, sample, m_trees as u64, j as u64);
        let tree = grow(prior, &mut full_ranges(prior.grid), 0, &mut rng);
        for (i, r) in rows.iter().enumerate() {
            f[i] += eval_tree(&tree, r);
        }
    }
    Ok(f)
}

fn full_ranges(grid: &SplitGrid) -> Vec<(usize, usize)> {
    grid.axes().iter().map(|a| (0, a.len())).collect()
}

/// Fraction of `n_trees` sampled trees that keep `x` and `x2` in one leaf.
pub fn same_leaf_frequency(prior: &TreePrior, x: &[f64], x2: &[f64], n_trees: u64, seed: u64) -> Result<f64> {
    prior.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ranges = full_ranges(prior.grid);
    let mut hits = 0u64;
    for _ in 0..n_trees {
        let tree = grow(prior, &mut ranges, 0, &mut rng);
        hits += same_leaf(&tree, x, x2) as u64;
    }
    Ok(hits as f64 / n_trees as f64)
}

/// Sample versus kernel covariance of prior draws of `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSampleReport {
    pub sample_cov: Vec<Vec<f64>>,
    pub kernel_cov: Vec<Vec<f64>>,
    pub mc_std: Vec<Vec<f64>>,
    pub max_z: f64,
    /// Šidák-corrected two-sided threshold for the distinct entries.
    pub threshold: f64,
    pub level: f64,
    pub passed: bool,
    pub n_samples: usize,
    pub m_trees: usize,
    pub seed: u64,
    /// Either `"depth4_midpoint"` or `"reference"`.
    pub kernel_estimate: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheckConfig {
    pub n_samples: usize,
    pub m_trees: usize,
    pub seed: u64,
    /// Total prior variance `m σ_μ²`; leaves get `N(0, total_var/m)`.
    pub total_var: f64,
    pub level: f64,
}

impl Default for CovarianceCheckConfig {
    fn default() -> Self {
        Self { n_samples: 50_000, m_trees: 200, seed: 0, total_var: 1.0, level: 0.01 }
    }
}

const CHUNK: usize = 512;

pub fn covariance_check(
    x: &DMatrix<f64>,
    grid: &SplitGrid,
    sched: &DepthSchedule,
    weights: &AxisWeights,
    cfg: &CovarianceCheckConfig,
) -> Result<PriorSampleReport> {
    let n = x.nrows();
    if n == 0 || x.ncols() != grid.dim() {
        return Err(invalid("covariance check needs a nonempty point set matching the grid"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance check points"));
    }
    if cfg.n_samples < 1000 {
        return Err(invalid("covariance check needs at least 1000 samples"));
    }
    if cfg.m_trees == 0 || !(cfg.total_var > 0.0) || !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(invalid("covariance check needs m >= 1, total_var > 0, level in (0, 1)"));
    }
    let prior = TreePrior {
        grid,
        sched,
        weights,
        leaf_mean: 0.0,
        leaf_sd: (cfg.total_var / cfg.m_trees as f64).sqrt(),
    };
    prior.validate()?;
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();

    // partial sums per fixed-size chunk of samples, merged in chunk order
    let n_chunks = cfg.n_samples.div_ceil(CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut s1 = vec![0.0; n];
            let mut s2 = vec![0.0; n * n];
            let mut f = vec![0.0; n];
            let mut ranges = full_ranges(grid);
            for s in c * CHUNK..((c + 1) * CHUNK).min(cfg.n_samples) {
                f.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..cfg.m_trees {
                    let mut rng = tree_rng(cfg.seed, s as u64, cfg.m_trees as u64, j as u64);
                    let tree = grow(&prior, &mut ranges, 0, &mut rng);
                    for (i, r) in rows.iter().enumerate() {
                        f[i] += eval_tree(&tree, r);
                    }
                }
                for i in 0..n {
                    s1[i] += f[i];
                    for k in i..n {
                        s2[i * n + k] += f[i] * f[k];
                    }
                }
            }
            (s1, s2)
        })
        .collect();
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n * n];
    for (a, b) in &partials {
        s1.iter_mut().zip(a).for_each(|(x, y)| *x += y);
        s2.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    }
    let nf = cfg.n_samples as f64;
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in i..n {
            let c = (s2[i * n + k] - s1[i] * s1[k] / nf) / (nf - 1.0);
            cov[(i, k)] = c;
            cov[(k, i)] = c;
        }
    }

    let (kcov, estimate) = kernel_covariance(&rows, grid, sched, weights, cfg.total_var)?;
    let mut se = DMatrix::zeros(n, n);
    let mut max_z: f64 = 0.0;
    for i in 0..n {
        for k in 0..n {
            // Normal-theory standard error of a sample covariance
            let v = ((cov[(i, k)].powi(2) + cov[(i, i)] * cov[(k, k)]) / nf).sqrt();
            se[(i, k)] = v;
            if k >= i && v > 0.0 {
                max_z = max_z.max((cov[(i, k)] - kcov[(i, k)]).abs() / v);
            }
        }
    }
    let entries = n * (n + 1) / 2;
    let threshold = sidak_threshold(cfg.level, entries);
    let to_rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(PriorSampleReport {
        sample_cov: to_rows(&cov),
        kernel_cov: to_rows(&kcov),
        mc_std: to_rows(&se),
        max_z,
        threshold,
        level: cfg.level,
        passed: max_z < threshold,
        n_samples: cfg.n_samples,
        m_trees: cfg.m_trees,
        seed: cfg.seed,
        kernel_estimate: estimate.to_string(),
    })
}

/// Two-sided normal threshold keeping the family-wise level at `level` over
/// `entries` independent tests.
pub fn sidak_threshold(level: f64, entries: usize) -> f64 {
    let per_test = -(-level).ln_1p() / entries as f64;
    let per_test = -(-per_test).exp_m1();
    crate::transform::norm_quantile(1.0 - per_test / 2.0)
}

fn kernel_covariance(
    rows: &[Vec<f64>],
    grid: &SplitGrid,
    sched: &DepthSchedule,
    weights: &AxisWeights,
    total_var: f64,
) -> Result<(DMatrix<f64>, &'static str)> {
    let n = rows.len();
    let mut k = DMatrix::zeros(n, n);
    let spec_lo = kernel::TruncationSpec::truncated(4, 0.0)?;
    let spec_hi = kernel::TruncationSpec::truncated(4, 1.0)?;
    let mut midpoint = true;
    'outer: for i in 0..n {
        for j in i..n {
            let c = count_splits(grid, &rows[i], &rows[j])?;
            let lo = kernel::pseudo_recursive_corr_budget(&c, weights, sched, 0, &spec_lo, DEFAULT_BUDGET);
            let hi = kernel::pseudo_recursive_corr_budget(&c, weights, sched, 0, &spec_hi, DEFAULT_BUDGET);
            match (lo, hi) {
                (Ok(a), Ok(b)) => {
                    k[(i, j)] = total_var * 0.5 * (a + b);
                    k[(j, i)] = k[(i, j)];
                }
                (Err(Error::BudgetExceeded { .. }), _) | (_, Err(Error::BudgetExceeded { .. })) => {
                    midpoint = false;
                    break 'outer;
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
    }
    if midpoint {
        return Ok((k, "depth4_midpoint"));
    }
    for i in 0..n {
        for j in i..n {
            let c = count_splits(grid, &rows[i], &rows[j])?;
            k[(i, j)] = total_var * kernel::reference_corr(&c, weights, sched)?;
            k[(j, i)] = k[(i, j)];
        }
    }
    Ok((k, "reference"))
}
