//! Recursion engines. `Literal` walks every decision rule as the recursion
//! is written; `Fast` replaces the last one or two levels of each span with
//! the closed-form expansions.

use std::collections::HashMap;

use super::closed::{depth1_value, depth2_value, s_and_w, t_sum, Reduced};
use super::schedule::DepthSchedule;
use crate::error::{Error, Result};
use crate::special::digamma_unchecked;

/// Default cap on recursive calls for the exponential walks.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

pub(crate) struct Literal<'a> {
    n0: &'a [usize],
    w: &'a [f64],
    sched: &'a DepthSchedule,
    /// Depth at which `bottom` is returned; `None` walks to exhaustion.
    end: Option<usize>,
    bottom: f64,
    calls: u64,
    limit: u64,
    memo: Option<HashMap<(usize, Vec<usize>), f64>>,
}

impl<'a> Literal<'a> {
    pub fn new(
        red: &'a Reduced,
        sched: &'a DepthSchedule,
        end: Option<usize>,
        bottom: f64,
        limit: u64,
        memoize: bool,
    ) -> Self {
        Self {
            n0: &red.between,
            w: &red.w,
            sched,
            end,
            bottom,
            calls: 0,
            limit,
            memo: memoize.then(HashMap::new),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn eval(&mut self, lo: &mut [usize], hi: &mut [usize], d: usize) -> Result<f64> {
        self.calls += 1;
        if self.calls > self.limit {
            return Err(Error::BudgetExceeded { limit: self.limit });
        }
        let p = self.w.len();
        let empty = (0..p).all(|i| lo[i] + self.n0[i] + hi[i] == 0);
        if empty {
            return Ok(1.0);
        }
        if self.end == Some(d) {
            let sep = self.n0.iter().any(|&c| c > 0);
            return Ok(if sep { self.bottom } else { 1.0 });
        }
        let pd = self.sched.prob(d);
        if pd == 0.0 {
            return Ok(1.0);
        }
        let key = self.memo.as_ref().map(|_| {
            let mut k = Vec::with_capacity(2 * p);
            k.extend_from_slice(lo);
            k.extend_from_slice(hi);
            (d, k)
        });
        if let (Some(memo), Some(key)) = (&self.memo, &key) {
            if let Some(&v) = memo.get(key) {
                return Ok(v);
            }
        }
        let mut tot = 0.0;
        let mut sum = 0.0;
        for i in 0..p {
            let n = lo[i] + self.n0[i] + hi[i];
            if n == 0 {
                continue;
            }
            tot += self.w[i];
            let mut inner = 0.0;
            let saved = lo[i];
            for k in 0..saved {
                lo[i] = k;
                inner += self.eval(lo, hi, d + 1)?;
            }
            lo[i] = saved;
            let saved = hi[i];
            for k in 0..saved {
                hi[i] = k;
                inner += self.eval(lo, hi, d + 1)?;
            }
            hi[i] = saved;
            sum += self.w[i] / n as f64 * inner;
        }
        let v = 1.0 - pd * (1.0 - sum / tot);
        if let (Some(memo), Some(key)) = (&mut self.memo, key) {
            memo.insert(key, v);
        }
        Ok(v)
    }
}

pub(crate) struct Fast<'a> {
    n0: &'a [usize],
    w: &'a [f64],
    probs: &'a [f64],
    end: usize,
    bottom: f64,
    psi: &'a [f64],
    calls: u64,
    limit: u64,
}

impl<'a> Fast<'a> {
    /// `probs` must cover depths up to `end`; `psi[n]` must hold ψ(n) for
    /// `1 ≤ n ≤ max n_i + 1`.
    pub fn new(red: &'a Reduced, probs: &'a [f64], psi: &'a [f64], end: usize, bottom: f64, limit: u64) -> Self {
        Self { n0: &red.between, w: &red.w, probs, end, bottom, psi, calls: 0, limit }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// Value at depth `d ≤ end`. Assumes `n⁰ ≠ 0`, so the base is `bottom`.
    pub fn eval(&mut self, lo: &mut [usize], hi: &mut [usize], d: usize) -> Result<f64> {
        self.calls += 1;
        if self.calls > self.limit {
            return Err(Error::BudgetExceeded { limit: self.limit });
        }
        let (n0, w) = (self.n0, self.w);
        match self.end - d {
            0 => return Ok(self.bottom),
            1 => {
                let (s, tot) = s_and_w(lo, n0, hi, w);
                return Ok(depth1_value(self.probs[d], self.bottom, s, tot));
            }
            2 => {
                let (s, tot) = s_and_w(lo, n0, hi, w);
                let psi = self.psi;
                let t = t_sum(lo, n0, hi, w, s, tot, &|n| psi[n]);
                return Ok(depth2_value(self.probs[d], self.probs[d + 1], self.bottom, s, t, tot));
            }
            _ => {}
        }
        let pd = self.probs[d];
        if pd == 0.0 {
            return Ok(1.0);
        }
        let mut tot = 0.0;
        let mut sum = 0.0;
        for i in 0..w.len() {
            let n = lo[i] + n0[i] + hi[i];
            if n == 0 {
                continue;
            }
            tot += w[i];
            let mut inner = 0.0;
            let saved = lo[i];
            for k in 0..saved {
                lo[i] = k;
                inner += self.eval(lo, hi, d + 1)?;
            }
            lo[i] = saved;
            let saved = hi[i];
            for k in 0..saved {
                hi[i] = k;
                inner += self.eval(lo, hi, d + 1)?;
            }
            hi[i] = saved;
            sum += w[i] / n as f64 * inner;
        }
        Ok(1.0 - pd * (1.0 - sum / tot))
    }
}

pub(crate) fn psi_table(max_n: usize) -> Vec<f64> {
    (0..=max_n + 1).map(|n| if n == 0 { f64::NAN } else { digamma_unchecked(n as f64) }).collect()
}
