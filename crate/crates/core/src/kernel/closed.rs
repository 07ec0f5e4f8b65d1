//! One- and two-level expansions of the recursion, on reduced counts (only
//! axes with `w_i > 0` and `n_i > 0`).

use crate::error::{Error, Result};
use crate::grid::{AxisWeights, SplitCounts};

/// Counts and weights restricted to the axes that can still be split.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Reduced {
    pub below: Vec<usize>,
    pub between: Vec<usize>,
    pub above: Vec<usize>,
    pub w: Vec<f64>,
}

impl Reduced {
    pub fn new(counts: &SplitCounts, w: &AxisWeights) -> Result<Self> {
        if counts.dim() != w.dim() {
            return Err(Error::DimensionMismatch { expected: counts.dim(), got: w.dim() });
        }
        let mut r = Reduced { below: vec![], between: vec![], above: vec![], w: vec![] };
        for (i, &wi) in w.as_slice().iter().enumerate() {
            if wi > 0.0 && counts.total(i) > 0 {
                r.below.push(counts.below[i]);
                r.between.push(counts.between[i]);
                r.above.push(counts.above[i]);
                r.w.push(wi);
            }
        }
        Ok(r)
    }

    pub fn separated(&self) -> bool {
        self.between.iter().any(|&c| c > 0)
    }

    pub fn max_total(&self) -> usize {
        (0..self.w.len()).map(|i| self.below[i] + self.between[i] + self.above[i]).max().unwrap_or(0)
    }
}

/// `(S, W)`: `S = Σ w_i (1 − n⁰_i/n_i)` and `W = Σ w_i` over axes with `n_i > 0`.
#[inline]
pub(crate) fn s_and_w(lo: &[usize], n0: &[usize], hi: &[usize], w: &[f64]) -> (f64, f64) {
    let mut s = 0.0;
    let mut tot = 0.0;
    for i in 0..w.len() {
        let n = lo[i] + n0[i] + hi[i];
        if n > 0 {
            s += w[i] * (1.0 - n0[i] as f64 / n as f64);
            tot += w[i];
        }
    }
    (s, tot)
}

/// `{x | e}`: `e` when `x > 0`, else 0 without evaluating `e`.
#[inline]
fn guarded(x: usize, num: usize) -> f64 {
    if x > 0 {
        num as f64 / x as f64
    } else {
        0.0
    }
}

/// The sum over axes in the two-level expansion, multiplied by `k_D` in the
/// final formula. `psi(n)` must return ψ(n) for integer `n ≥ 1`.
#[inline]
pub(crate) fn t_sum<F: Fn(usize) -> f64>(
    lo: &[usize],
    n0: &[usize],
    hi: &[usize],
    w: &[f64],
    s: f64,
    tot: f64,
    psi: &F,
) -> f64 {
    let mut t = 0.0;
    for i in 0..w.len() {
        let (nm, nz, np) = (lo[i], n0[i], hi[i]);
        let n = nm + nz + np;
        if n == 0 {
            continue;
        }
        let wi = w[i];
        let nf = n as f64;
        let w_lo0 = if nz + np == 0 { tot - wi } else { tot };
        let w_hi0 = if nz + nm == 0 { tot - wi } else { tot };
        let mut term = (s + wi * nz as f64 / nf)
            * (1.0 / w_lo0 + 1.0 / w_hi0 + ((nm + np) as f64 - 2.0) / tot);
        term += wi / w_lo0 * (guarded(nz + np, np) - 1.0);
        term += wi / w_hi0 * (guarded(nz + nm, nm) - 1.0);
        if nz > 0 {
            term -= wi * nz as f64 / tot * (2.0 * psi(n) - psi(1 + nz + nm) - psi(1 + nz + np));
        }
        t += wi / nf * term;
    }
    t
}

/// One-level expansion at depth `d` with child value `k_next`.
#[inline]
pub(crate) fn depth1_value(pd: f64, k_next: f64, s: f64, tot: f64) -> f64 {
    1.0 - pd * (1.0 - k_next * s / tot)
}

/// Two-level expansion at depth `d` with grandchild value `k_d2`.
#[inline]
pub(crate) fn depth2_value(pd: f64, pd1: f64, k_d2: f64, s: f64, t: f64, tot: f64) -> f64 {
    1.0 - pd * (1.0 - ((1.0 - pd1) * s + pd1 * k_d2 * t) / tot)
}

/// One reset span of length 2 expressed through `s = S/W`, `t = T/W`.
#[inline]
pub(crate) fn chain2(pd: f64, pd1: f64, k_next: f64, s: f64, t: f64) -> f64 {
    1.0 - pd * (1.0 - (1.0 - pd1) * s - pd1 * k_next * t)
}

/// One reset span of length 1 expressed through `s = S/W`.
#[inline]
pub(crate) fn chain1(pd: f64, k_next: f64, s: f64) -> f64 {
    1.0 - pd * (1.0 - k_next * s)
}
