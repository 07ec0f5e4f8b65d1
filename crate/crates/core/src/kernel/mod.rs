//! The BART prior correlation: exact recursion, truncated and
//! pseudo-recursive bounds, closed-form expansions, and comparison kernels.
//!
//! Every entry point takes the tree-prior probabilities through a
//! [`DepthSchedule`]; the `P₀ ↦ 1` variant is obtained with
//! [`DepthSchedule::with_root_certain`].

mod closed;
pub mod comparison;
mod schedule;
mod walk;

pub use comparison::{comparison_kernel, ComparisonKernel, ComparisonValue};
pub use schedule::{depth_prob, BoundPair, DepthSchedule, TruncationSpec};
pub use walk::DEFAULT_BUDGET;

pub(crate) use closed::{chain1, chain2, s_and_w, t_sum, Reduced};

use crate::error::{invalid, Result};
use crate::grid::{AxisWeights, SplitCounts};
use crate::special::digamma_unchecked;
use walk::{psi_table, Fast, Literal};

/// Exact correlation `k_d` by full recursion, capped at [`DEFAULT_BUDGET`]
/// recursive calls.
pub fn exact_corr(counts: &SplitCounts, w: &AxisWeights, sched: &DepthSchedule, d: usize) -> Result<f64> {
    exact_corr_budget(counts, w, sched, d, DEFAULT_BUDGET).map(|(v, _)| v)
}

/// [`exact_corr`] with an explicit call budget; also returns the calls used.
pub fn exact_corr_budget(
    counts: &SplitCounts,
    w: &AxisWeights,
    sched: &DepthSchedule,
    d: usize,
    limit: u64,
) -> Result<(f64, u64)> {
    let red = Reduced::new(counts, w)?;
    let (mut lo, mut hi) = (red.below.clone(), red.above.clone());
    let mut walker = Literal::new(&red, sched, None, 1.0, limit, true);
    let v = walker.eval(&mut lo, &mut hi, d)?;
    Ok((v, walker.calls()))
}

fn base_value(sched: &DepthSchedule, depth: usize, gamma: f64) -> f64 {
    1.0 - (1.0 - gamma) * sched.prob(depth)
}

/// Truncated correlation `k^D_{d,γ}`.
pub fn truncated_corr(
    counts: &SplitCounts,
    w: &AxisWeights,
    sched: &DepthSchedule,
    d: usize,
    depth: usize,
    gamma: f64,
) -> Result<f64> {
    if d > depth {
        return Err(invalid(format!("start depth {d} exceeds truncation depth {depth}")));
    }
    let spec = TruncationSpec::truncated(depth.max(1), gamma)?;
    if depth == 0 {
        // only d = 0 = D reaches here
        let red = Reduced::new(counts, w)?;
        return Ok(if red.separated() { base_value(sched, 0, gamma) } else { 1.0 });
    }
    pseudo_recursive_corr(counts, w, sched, d, &spec)
}

/// Pseudo-recursive correlation `k^{(D₁,…,D_r)}_{d,γ}`.
pub fn pseudo_recursive_corr(
    counts: &SplitCounts,
    w: &AxisWeights,
    sched: &DepthSchedule,
    d: usize,
    spec: &TruncationSpec,
) -> Result<f64> {
    pseudo_recursive_corr_budget(counts, w, sched, d, spec, u64::MAX)
}

/// [`pseudo_recursive_corr`] with a cap on recursive calls across all spans.
pub fn pseudo_recursive_corr_budget(
    counts: &SplitCounts,
    w: &AxisWeights,
    sched: &DepthSchedule,
    d: usize,
    spec: &TruncationSpec,
    limit: u64,
) -> Result<f64> {
    let spans = spec.spans_from(d)?;
    let red = Reduced::new(counts, w)?;
    if !red.separated() {
        return Ok(1.0);
    }
    let probs = sched.table(spec.max_depth() + 1);
    let mut v = 1.0 - (1.0 - spec.gamma()) * probs[spec.max_depth()];
    if let Some(c) = closed_chain(&spans, &probs, || st_ratios(&red, &digamma_unchecked), v) {
        return Ok(c);
    }
    let psi = psi_table(red.max_total());
    let mut used = 0u64;
    for &(a, b) in spans.iter().rev() {
        let (mut lo, mut hi) = (red.below.clone(), red.above.clone());
        let mut fast = Fast::new(&red, &probs, &psi, b, v, limit - used);
        v = fast.eval(&mut lo, &mut hi, a)?;
        used += fast.calls();
    }
    Ok(v)
}

/// `(S/W, T/W)` for separated reduced counts.
pub(crate) fn st_ratios<F: Fn(f64) -> f64>(red: &Reduced, psi: &F) -> (f64, f64) {
    let (s, tot) = s_and_w(&red.below, &red.between, &red.above, &red.w);
    let t = t_sum(&red.below, &red.between, &red.above, &red.w, s, tot, &|n| psi(n as f64));
    (s / tot, t / tot)
}

/// Evaluates the spans bottom-up without recursion when each has length 1
/// or 2; `None` if some span is longer. `st` is only called when needed.
pub(crate) fn closed_chain<G: FnOnce() -> (f64, f64)>(
    spans: &[(usize, usize)],
    probs: &[f64],
    st: G,
    bottom: f64,
) -> Option<f64> {
    if spans.iter().any(|&(a, b)| b - a > 2) {
        return None;
    }
    let (s, t) = st();
    let mut v = bottom;
    for &(a, b) in spans.iter().rev() {
        v = if b - a == 2 { chain2(probs[a], probs[a + 1], v, s, t) } else { chain1(probs[a], v, s) };
    }
    Some(v)
}

/// One-level expansion `1 − P_d(1 − k_next(1 − Σ w_i n⁰_i/n_i / W))`;
/// equals 1 when `n⁰ = 0`.
pub fn depth1_closed(
    counts: &SplitCounts,
    w: &AxisWeights,
    sched: &DepthSchedule,
    d: usize,
    k_next: f64,
) -> Result<f64> {
    let red = Reduced::new(counts, w)?;
    if !red.separated() {
        return Ok(1.0);
    }
    let (s, tot) = s_and_w(&red.below, &red.between, &red.above, &red.w);
    Ok(closed::depth1_value(sched.prob(d), k_next, s, tot))
}

/// Two-level expansion: `k^{d+2}_{d,γ}` without recursion.
pub fn depth2_closed(
    counts: &SplitCounts,
    w: &AxisWeights,
    sched: &DepthSchedule,
    d: usize,
    gamma: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let red = Reduced::new(counts, w)?;
    if !red.separated() {
        return Ok(1.0);
    }
    let k_d2 = base_value(sched, d + 2, gamma);
    let (s, tot) = s_and_w(&red.below, &red.between, &red.above, &red.w);
    let t = t_sum(&red.below, &red.between, &red.above, &red.w, s, tot, &|n| digamma_unchecked(n as f64));
    Ok(closed::depth2_value(sched.prob(d), sched.prob(d + 1), k_d2, s, t, tot))
}

/// The production estimator `k^{2,5}_{0,1}` (resets at 2, 4, 6, 8, 10, `γ = 1`).
pub fn reference_corr(counts: &SplitCounts, w: &AxisWeights, sched: &DepthSchedule) -> Result<f64> {
    pseudo_recursive_corr(counts, w, sched, 0, &TruncationSpec::reference())
}

/// Lower bound `k^{D₀}_{0,0}` and upper bound `k^{D₀,r}_{0,1}`.
pub fn bounds(
    counts: &SplitCounts,
    w: &AxisWeights,
    sched: &DepthSchedule,
    d0: usize,
    r: usize,
) -> Result<BoundPair> {
    let spec_lower = TruncationSpec::truncated(d0, 0.0)?;
    let spec_upper = TruncationSpec::uniform(d0, r, 1.0)?;
    Ok(BoundPair {
        lower: pseudo_recursive_corr(counts, w, sched, 0, &spec_lower)?,
        upper: pseudo_recursive_corr(counts, w, sched, 0, &spec_upper)?,
        spec_lower,
        spec_upper,
    })
}

/// Literal recursion walks of the truncated and pseudo-recursive kernels,
/// decrementing one count per decision rule as the recursion is written.
/// Exponential cost; meant as a cross-check of the closed forms.
pub mod walked {
    use super::*;

    pub fn truncated_corr(
        counts: &SplitCounts,
        w: &AxisWeights,
        sched: &DepthSchedule,
        d: usize,
        depth: usize,
        gamma: f64,
        limit: u64,
    ) -> Result<f64> {
        if d > depth {
            return Err(invalid(format!("start depth {d} exceeds truncation depth {depth}")));
        }
        let red = Reduced::new(counts, w)?;
        let (mut lo, mut hi) = (red.below.clone(), red.above.clone());
        Literal::new(&red, sched, Some(depth), base_value(sched, depth, gamma), limit, false)
            .eval(&mut lo, &mut hi, d)
    }

    /// Each span restarts from the original counts; the value entering a
    /// reset depth is the walk of the next span.
    pub fn pseudo_recursive_corr(
        counts: &SplitCounts,
        w: &AxisWeights,
        sched: &DepthSchedule,
        d: usize,
        spec: &TruncationSpec,
        limit: u64,
    ) -> Result<f64> {
        let spans = spec.spans_from(d)?;
        let red = Reduced::new(counts, w)?;
        let mut v = base_value(sched, spec.max_depth(), spec.gamma());
        if spans.is_empty() {
            return Ok(if red.separated() { v } else { 1.0 });
        }
        for &(a, b) in spans.iter().rev() {
            let (mut lo, mut hi) = (red.below.clone(), red.above.clone());
            v = Literal::new(&red, sched, Some(b), v, limit, true).eval(&mut lo, &mut hi, a)?;
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(t: (usize, usize, usize)) -> SplitCounts {
        SplitCounts::from_triples(&[t])
    }

    fn defaults() -> DepthSchedule {
        DepthSchedule::new(0.95, 2.0).unwrap()
    }

    #[test]
    fn exact_small_values() {
        let w = AxisWeights::uniform(1);
        let s = defaults();
        assert_eq!(exact_corr(&one((0, 0, 0)), &w, &s, 0).unwrap(), 1.0);
        assert_eq!(exact_corr(&one((3, 0, 2)), &w, &s, 0).unwrap(), 1.0);
        assert!((exact_corr(&one((0, 5, 0)), &w, &s, 0).unwrap() - 0.05).abs() < 1e-15);
        // k₀ = 1 − 0.95(1 − ½(1 − 0.2375))
        let v = exact_corr(&one((0, 1, 1)), &w, &s, 0).unwrap();
        assert!((v - 0.4121875).abs() < 1e-15);
    }

    #[test]
    fn truncated_and_closed_agree_on_hand_example() {
        let w = AxisWeights::uniform(1);
        let s = defaults();
        let c = one((0, 1, 1));
        assert!((truncated_corr(&c, &w, &s, 0, 2, 1.0).unwrap() - 0.4121875).abs() < 1e-15);
        assert!((depth2_closed(&c, &w, &s, 0, 1.0).unwrap() - 0.4121875).abs() < 1e-15);
        let base = truncated_corr(&one((0, 2, 0)), &w, &s, 3, 3, 0.0).unwrap();
        assert!((base - (1.0 - s.prob(3))).abs() < 1e-15);
        assert_eq!(truncated_corr(&one((0, 2, 0)), &w, &s, 3, 3, 1.0).unwrap(), 1.0);
        assert!(truncated_corr(&c, &w, &s, 3, 2, 1.0).is_err());
    }

    #[test]
    fn depth1_matches_no_interaction_exact() {
        let w = AxisWeights::uniform(1);
        let s = defaults();
        let c = one((0, 3, 7));
        assert!((depth1_closed(&c, &w, &s, 0, 1.0).unwrap() - 0.715).abs() < 1e-15);
        let s0 = s.clone().with_override(1, 0.0).unwrap();
        assert!((exact_corr(&c, &w, &s0, 0).unwrap() - 0.715).abs() < 1e-15);
        assert_eq!(depth1_closed(&one((4, 0, 6)), &w, &s, 0, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn reference_endpoints() {
        let w = AxisWeights::uniform(1);
        let s = defaults();
        assert_eq!(reference_corr(&one((40, 0, 60)), &w, &s).unwrap(), 1.0);
        assert!((reference_corr(&one((0, 100, 0)), &w, &s).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn chain_matches_fast_walk() {
        // the closed chain must agree with span-by-span fast walks
        let w = AxisWeights::new(vec![1.0, 0.5]).unwrap();
        let s = DepthSchedule::new(0.8, 1.3).unwrap();
        let c = SplitCounts::from_triples(&[(2, 3, 1), (0, 1, 4)]);
        let red = Reduced::new(&c, &w).unwrap();
        let spec = TruncationSpec::reference();
        let probs = s.table(11);
        let psi = psi_table(red.max_total());
        let mut v = 1.0;
        for &(a, b) in spec.spans_from(0).unwrap().iter().rev() {
            let (mut lo, mut hi) = (red.below.clone(), red.above.clone());
            v = Fast::new(&red, &probs, &psi, b, v, u64::MAX).eval(&mut lo, &mut hi, a).unwrap();
        }
        let chained = reference_corr(&c, &w, &s).unwrap();
        assert!((v - chained).abs() < 1e-14);
    }

    #[test]
    fn budget_is_enforced() {
        let w = AxisWeights::uniform(3);
        let s = DepthSchedule::new(1.0, 0.0).unwrap();
        let c = SplitCounts::from_triples(&[(3, 2, 3), (3, 2, 3), (3, 2, 3)]);
        let err = exact_corr_budget(&c, &w, &s, 0, 100).unwrap_err();
        assert_eq!(err, crate::error::Error::BudgetExceeded { limit: 100 });
    }
}
