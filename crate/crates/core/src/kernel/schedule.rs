use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Depth-dependent probability that a node is nonterminal,
/// `P_d = α/(1+d)^β`, with optional per-depth overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSchedule {
    alpha: f64,
    beta: f64,
    overrides: BTreeMap<usize, f64>,
}

impl DepthSchedule {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(invalid(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(Self { alpha, beta, overrides: BTreeMap::new() })
    }

    /// Replaces `P_d` by `prob`.
    pub fn with_override(mut self, d: usize, prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(invalid(format!("override probability must lie in [0, 1], got {prob}")));
        }
        self.overrides.insert(d, prob);
        Ok(self)
    }

    /// Sets `P_0 = 1`: the root always splits, which removes the constant
    /// `1 − α` component of the correlation.
    pub fn with_root_certain(mut self) -> Self {
        self.overrides.insert(0, 1.0);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn overrides(&self) -> &BTreeMap<usize, f64> {
        &self.overrides
    }

    pub fn root_certain(&self) -> bool {
        self.overrides.get(&0) == Some(&1.0)
    }

    /// Same overrides, different `α`, `β`.
    pub fn with_params(&self, alpha: f64, beta: f64) -> Result<Self> {
        let mut s = Self::new(alpha, beta)?;
        s.overrides = self.overrides.clone();
        Ok(s)
    }

    pub fn prob(&self, d: usize) -> f64 {
        match self.overrides.get(&d) {
            Some(&p) => p,
            None => self.alpha / ((1 + d) as f64).powf(self.beta),
        }
    }

    /// `P_0, …, P_max_depth`.
    pub fn table(&self, max_depth: usize) -> Vec<f64> {
        (0..=max_depth).map(|d| self.prob(d)).collect()
    }
}

pub fn depth_prob(sched: &DepthSchedule, d: usize) -> f64 {
    sched.prob(d)
}

/// Reset depths `D₁ < … < D_r` and the interpolation weight `γ` of the
/// truncation base `1 − (1−γ)P_{D_r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    reset_depths: Vec<usize>,
    gamma: f64,
}

impl TruncationSpec {
    pub fn new(reset_depths: Vec<usize>, gamma: f64) -> Result<Self> {
        if reset_depths.is_empty() {
            return Err(invalid("truncation spec needs at least one depth"));
        }
        if reset_depths[0] == 0 || reset_depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("reset depths must be positive and strictly increasing"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        Ok(Self { reset_depths, gamma })
    }

    /// `(D₀, 2D₀, …, rD₀)`.
    pub fn uniform(d0: usize, r: usize, gamma: f64) -> Result<Self> {
        if d0 == 0 || r == 0 {
            return Err(invalid("uniform truncation needs D0 >= 1 and r >= 1"));
        }
        Self::new((1..=r).map(|j| j * d0).collect(), gamma)
    }

    /// Plain truncation at depth `depth`.
    pub fn truncated(depth: usize, gamma: f64) -> Result<Self> {
        Self::new(vec![depth], gamma)
    }

    /// The production estimator: resets at 2, 4, 6, 8, 10 with `γ = 1`.
    pub fn reference() -> Self {
        Self { reset_depths: vec![2, 4, 6, 8, 10], gamma: 1.0 }
    }

    /// Lower bound paired with [`TruncationSpec::reference`].
    pub fn reference_lower() -> Self {
        Self { reset_depths: vec![2], gamma: 0.0 }
    }

    pub fn reset_depths(&self) -> &[usize] {
        &self.reset_depths
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn max_depth(&self) -> usize {
        *self.reset_depths.last().expect("nonempty")
    }

    /// Consecutive recursion spans starting from depth `d`.
    pub(crate) fn spans_from(&self, d: usize) -> Result<Vec<(usize, usize)>> {
        if d > self.max_depth() {
            return Err(Error::InvalidArgument(format!(
                "start depth {d} exceeds truncation depth {}",
                self.max_depth()
            )));
        }
        let mut spans = Vec::new();
        let mut start = d;
        for &end in self.reset_depths.iter().filter(|&&e| e > d) {
            spans.push((start, end));
            start = end;
        }
        Ok(spans)
    }
}

/// A lower and an upper bound on the correlation, with their configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
    pub spec_lower: TruncationSpec,
    pub spec_upper: TruncationSpec,
}

impl BoundPair {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}
