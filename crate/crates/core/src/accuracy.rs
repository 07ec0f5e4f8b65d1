//! Accuracy of the truncated bounds: interval widths, the high-accuracy
//! reference value `K`, the interpolation coefficient `γ_K`, and error
//! bounds over quasi-random location pairs.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{count_splits, AxisWeights, SplitCounts, SplitGrid};
use crate::kernel::{pseudo_recursive_corr_budget, DepthSchedule, TruncationSpec};

/// Extrapolated reference value from the `D₀ = 3` and `D₀ = 5` intervals
/// (upper bounds with `r = 5`).
pub fn reference_k(lb3: f64, ub35: f64, lb5: f64, ub55: f64) -> Result<f64> {
    if lb3 > ub35 || lb5 > ub55 {
        return Err(invalid("inverted bounds"));
    }
    let (d35, d55) = (ub35 - lb3, ub55 - lb5);
    if d35 < d55 {
        return Err(invalid("the D0 = 3 interval is narrower than the D0 = 5 one"));
    }
    if d35 == d55 {
        return Ok(0.5 * (lb5 + ub55));
    }
    Ok((d35 * lb5 - d55 * lb3) / (d35 - d55))
}

/// `(K − lower)/(upper − lower)`, or `None` if the width is below 1e-12.
pub fn gamma_of_k(k: f64, lower: f64, upper: f64) -> Option<f64> {
    let width = upper - lower;
    if width < 1e-12 {
        None
    } else {
        Some((k - lower) / width)
    }
}

/// Weighted median: the first value, in increasing order, at which the
/// cumulative weight reaches half the total. Ties in value keep input order.
pub fn weighted_median(items: &[(f64, f64)]) -> Option<f64> {
    let mut v: Vec<(f64, f64)> = items.iter().copied().filter(|(_, w)| *w > 0.0).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * v.iter().map(|x| x.1).sum::<f64>();
    let mut acc = 0.0;
    for (g, w) in &v {
        acc += w;
        if acc >= half {
            return Some(*g);
        }
    }
    v.last().map(|x| x.0)
}

/// Additive recurrence with the generalized golden ratio, randomly shifted.
#[derive(Debug, Clone)]
pub struct QmcSequence {
    step: Vec<f64>,
    shift: Vec<f64>,
    index: u64,
}

impl QmcSequence {
    pub fn new(dim: usize, seed: u64) -> Self {
        // φ_d solves x^{d+1} = x + 1
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
        }
        let step = (1..=dim).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.gen::<f64>()).collect();
        Self { step, shift, index: 0 }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        self.index += 1;
        let i = self.index as f64;
        self.step.iter().zip(&self.shift).map(|(a, s)| (s + i * a).fract()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub ps: Vec<usize>,
    pub d0s: Vec<usize>,
    pub rs: Vec<usize>,
    pub n_pairs: usize,
    pub n_splits: usize,
    pub seed: u64,
    /// Recursive-call cap per bound; pairs exceeding it are skipped.
    pub budget: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.95],
            betas: vec![2.0],
            ps: vec![1, 2, 3, 10],
            d0s: vec![1, 2, 3],
            rs: vec![1, 2, 5],
            n_pairs: 250,
            n_splits: 10,
            seed: 0,
            budget: 200_000_000,
        }
    }
}

/// One row per `(α, β, p, D₀, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub p: usize,
    pub d0: usize,
    pub r: usize,
    /// Width-weighted median of `γ_K`; `None` if every width was negligible.
    pub gamma_bar: Option<f64>,
    pub max_width: f64,
    pub max_error: f64,
    pub n_pairs: usize,
    pub n_skipped: usize,
}

/// Bounds for one location pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    /// `(D₀, k^{D₀}_{0,0})`.
    pub lower_by_depth: Vec<(usize, f64)>,
    /// `((D₀, r), k^{D₀,r}_{0,1})`.
    pub upper_by_depth_r: Vec<((usize, usize), f64)>,
    pub k: f64,
}

impl AccuracyPoint {
    pub fn lower(&self, d0: usize) -> Option<f64> {
        self.lower_by_depth.iter().find(|x| x.0 == d0).map(|x| x.1)
    }

    pub fn upper(&self, d0: usize, r: usize) -> Option<f64> {
        self.upper_by_depth_r.iter().find(|x| x.0 == (d0, r)).map(|x| x.1)
    }

    pub fn gamma_k(&self, d0: usize, r: usize) -> Option<f64> {
        gamma_of_k(self.k, self.lower(d0)?, self.upper(d0, r)?)
    }

    pub fn width(&self, d0: usize, r: usize) -> Option<f64> {
        Some(self.upper(d0, r)? - self.lower(d0)?)
    }

    /// `max{|k^{5,5} − k^{D₀,r}|, |k^{D₀,r} − k^5|}`.
    pub fn error_bound(&self, d0: usize, r: usize) -> Option<f64> {
        let ub = self.upper(d0, r)?;
        Some((self.upper(5, 5)? - ub).abs().max((ub - self.lower(5)?).abs()))
    }
}

/// Bounds at every requested `(D₀, r)` plus the `D₀ ∈ {3, 5}` pairs used for `K`.
pub fn accuracy_point(
    counts: &SplitCounts,
    w: &AxisWeights,
    sched: &DepthSchedule,
    d0s: &[usize],
    rs: &[usize],
    budget: u64,
) -> Result<AccuracyPoint> {
    let mut lower_depths: Vec<usize> = d0s.iter().copied().chain([3, 5]).collect();
    lower_depths.sort_unstable();
    lower_depths.dedup();
    let mut uppers: Vec<(usize, usize)> = d0s.iter().flat_map(|&d| rs.iter().map(move |&r| (d, r))).chain([(3, 5), (5, 5)]).collect();
    uppers.sort_unstable();
    uppers.dedup();
    let lower_by_depth = lower_depths
        .iter()
        .map(|&d| Ok((d, pseudo_recursive_corr_budget(counts, w, sched, 0, &TruncationSpec::truncated(d, 0.0)?, budget)?)))
        .collect::<Result<Vec<_>>>()?;
    let upper_by_depth_r = uppers
        .iter()
        .map(|&(d, r)| {
            let spec = TruncationSpec::uniform(d, r, 1.0)?;
            Ok(((d, r), pseudo_recursive_corr_budget(counts, w, sched, 0, &spec, budget)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pt = AccuracyPoint { lower_by_depth, upper_by_depth_r, k: 0.0 };
    pt.k = reference_k(
        pt.lower(3).expect("present"),
        pt.upper(3, 5).expect("present"),
        pt.lower(5).expect("present"),
        pt.upper(5, 5).expect("present"),
    )?;
    Ok(pt)
}

/// Location pairs for one dimension: the first `p` coordinates of each QMC
/// point are `x`, the rest `x′`.
pub fn sweep_pairs(p: usize, n_pairs: usize, n_splits: usize, seed: u64) -> Result<Vec<SplitCounts>> {
    let grid = SplitGrid::unit_uniform(p, n_splits);
    let mut q = QmcSequence::new(2 * p, seed ^ (p as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (0..n_pairs)
        .map(|_| {
            let u = q.next_point();
            count_splits(&grid, &u[..p], &u[p..])
        })
        .collect()
}

/// Runs the sweep; `P₀ ↦ 1` is applied throughout.
pub fn run_accuracy_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.alphas.is_empty() || cfg.betas.is_empty() || cfg.ps.is_empty() || cfg.d0s.is_empty() || cfg.rs.is_empty() {
        return Err(invalid("sweep configuration has an empty axis"));
    }
    if cfg.n_pairs == 0 || cfg.n_splits == 0 {
        return Err(invalid("sweep needs n_pairs >= 1 and n_splits >= 1"));
    }
    let mut combos = Vec::new();
    for &a in &cfg.alphas {
        for &b in &cfg.betas {
            for &p in &cfg.ps {
                combos.push((a, b, p));
            }
        }
    }
    let blocks: Vec<Vec<SweepRow>> = combos
        .par_iter()
        .map(|&(alpha, beta, p)| -> Result<Vec<SweepRow>> {
            let sched = DepthSchedule::new(alpha, beta)?.with_root_certain();
            let w = AxisWeights::uniform(p);
            let pairs = sweep_pairs(p, cfg.n_pairs, cfg.n_splits, cfg.seed)?;
            let mut points = Vec::with_capacity(pairs.len());
            let mut skipped = 0;
            for c in &pairs {
                match accuracy_point(c, &w, &sched, &cfg.d0s, &cfg.rs, cfg.budget) {
                    Ok(pt) => points.push(pt),
                    Err(Error::BudgetExceeded { .. }) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            let mut rows = Vec::new();
            for &d0 in &cfg.d0s {
                for &r in &cfg.rs {
                    let mut gw = Vec::new();
                    let (mut max_width, mut max_error) = (0.0f64, 0.0f64);
                    for pt in &points {
                        let width = pt.width(d0, r).expect("computed");
                        max_width = max_width.max(width);
                        max_error = max_error.max(pt.error_bound(d0, r).expect("computed"));
                        if let Some(g) = pt.gamma_k(d0, r) {
                            gw.push((g, width));
                        }
                    }
                    rows.push(SweepRow {
                        alpha,
                        beta,
                        p,
                        d0,
                        r,
                        gamma_bar: weighted_median(&gw),
                        max_width,
                        max_error,
                        n_pairs: points.len(),
                        n_skipped: skipped,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}
