//! Splitting grids and the per-axis count triples the kernel consumes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// How to place cutpoints on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridStrategy {
    /// Midpoints between consecutive distinct observed values.
    Midpoints,
    /// `count` equally spaced cutpoints strictly inside `(lo, hi)`, same on every axis.
    Uniform { count: usize, lo: f64, hi: f64 },
}

/// Per-axis sorted cutpoints. Axis `i` has `n_i = axes[i].len()` splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitGrid {
    axes: Vec<Vec<f64>>,
}

impl SplitGrid {
    /// Builds a grid from explicit cutpoints. Each axis must be finite and
    /// strictly increasing.
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        for (i, axis) in axes.iter().enumerate() {
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("grid cutpoints"));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!("axis {i} cutpoints not strictly increasing")));
            }
        }
        Ok(Self { axes })
    }

    /// `p` axes each holding `n` cutpoints at `j/(n+1)`, `j = 1..=n`.
    pub fn unit_uniform(p: usize, n: usize) -> Self {
        let axis: Vec<f64> = (1..=n).map(|j| j as f64 / (n + 1) as f64).collect();
        Self { axes: vec![axis; p] }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    pub fn n_splits(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Number of cutpoints strictly below `v` on axis `i`.
    #[inline]
    pub fn rank(&self, i: usize, v: f64) -> usize {
        self.axes[i].partition_point(|&s| s < v)
    }

    /// Per-axis ranks of a point; `count_splits` only needs these.
    pub fn ranks(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_point(self, x)?;
        Ok(x.iter().enumerate().map(|(i, &v)| self.rank(i, v)).collect())
    }
}

fn check_point(grid: &SplitGrid, x: &[f64]) -> Result<()> {
    if x.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("point coordinates"));
    }
    Ok(())
}

/// Builds a grid from the columns of `x` (rows are observations).
pub fn build_grid(x: &DMatrix<f64>, strategy: GridStrategy) -> Result<SplitGrid> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Empty("predictor matrix"));
    }
    match strategy {
        GridStrategy::Midpoints => {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("predictor matrix"));
            }
            let axes = x
                .column_iter()
                .map(|col| {
                    let mut u: Vec<f64> = col.iter().copied().collect();
                    u.sort_by(f64::total_cmp);
                    u.dedup();
                    let mut mids: Vec<f64> = u.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
                    mids.dedup();
                    mids
                })
                .collect();
            SplitGrid::new(axes)
        }
        GridStrategy::Uniform { count, lo, hi } => {
            if count < 1 {
                return Err(invalid("uniform grid needs count >= 1"));
            }
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::NonFinite("uniform grid bounds"));
            }
            if lo >= hi {
                return Err(invalid("uniform grid needs lo < hi"));
            }
            let step = (hi - lo) / (count + 1) as f64;
            let mut axis: Vec<f64> = (1..=count).map(|j| lo + step * j as f64).collect();
            axis.dedup();
            SplitGrid::new(vec![axis; x.ncols()])
        }
    }
}

/// Per-axis counts of cutpoints below, between and above a pair of points.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitCounts {
    pub below: Vec<usize>,
    pub between: Vec<usize>,
    pub above: Vec<usize>,
}

impl SplitCounts {
    pub fn new(below: Vec<usize>, between: Vec<usize>, above: Vec<usize>) -> Result<Self> {
        let p = below.len();
        if between.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: between.len() });
        }
        if above.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: above.len() });
        }
        Ok(Self { below, between, above })
    }

    /// Builds counts from `(n⁻, n⁰, n⁺)` triples, one per axis.
    pub fn from_triples(triples: &[(usize, usize, usize)]) -> Self {
        Self {
            below: triples.iter().map(|t| t.0).collect(),
            between: triples.iter().map(|t| t.1).collect(),
            above: triples.iter().map(|t| t.2).collect(),
        }
    }

    /// Counts for a pair whose per-axis ranks are `ra`, `rb` on axes of
    /// sizes `n`.
    pub fn from_ranks(ra: &[usize], rb: &[usize], n: &[usize]) -> Self {
        let p = n.len();
        let mut out = Self { below: vec![0; p], between: vec![0; p], above: vec![0; p] };
        for i in 0..p {
            let (lo, hi) = if ra[i] <= rb[i] { (ra[i], rb[i]) } else { (rb[i], ra[i]) };
            out.below[i] = lo;
            out.between[i] = hi - lo;
            out.above[i] = n[i] - hi;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.below.len()
    }

    pub fn total(&self, i: usize) -> usize {
        self.below[i] + self.between[i] + self.above[i]
    }

    pub fn separated(&self) -> bool {
        self.between.iter().any(|&c| c > 0)
    }
}

/// Reduces a pair of points to split counts. A split at `s` sends `v <= s`
/// left, so cutpoints in `[min, max)` separate the pair and count as between.
pub fn count_splits(grid: &SplitGrid, x: &[f64], x2: &[f64]) -> Result<SplitCounts> {
    let ra = grid.ranks(x)?;
    let rb = grid.ranks(x2)?;
    Ok(SplitCounts::from_ranks(&ra, &rb, &grid.n_splits()))
}

/// Nonnegative per-axis weights for choosing the split variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisWeights {
    w: Vec<f64>,
}

impl AxisWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("axis weights"));
        }
        if w.iter().any(|&v| v < 0.0) {
            return Err(invalid("axis weights must be nonnegative"));
        }
        if !w.is_empty() && !w.iter().any(|&v| v > 0.0) {
            return Err(invalid("at least one axis weight must be positive"));
        }
        Ok(Self { w })
    }

    pub fn uniform(p: usize) -> Self {
        Self { w: vec![1.0; p] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoints_of_distinct_values() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 4.0, 2.0, 5.0, 5.0, 5.0]);
        let g = build_grid(&x, GridStrategy::Midpoints).unwrap();
        assert_eq!(g.axis(0), &[1.5, 3.0]);
        assert!(g.axis(1).is_empty());
    }

    #[test]
    fn uniform_grid_is_interior() {
        let x = DMatrix::zeros(1, 1);
        let g = build_grid(&x, GridStrategy::Uniform { count: 100, lo: 0.0, hi: 1.0 }).unwrap();
        assert_eq!(g.axis(0).len(), 100);
        assert!(g.axis(0)[0] > 0.0 && g.axis(0)[99] < 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        let x = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(build_grid(&x, GridStrategy::Midpoints).is_err());
        assert!(build_grid(&DMatrix::zeros(0, 2), GridStrategy::Midpoints).is_err());
        let x = DMatrix::zeros(2, 1);
        assert!(build_grid(&x, GridStrategy::Uniform { count: 0, lo: 0.0, hi: 1.0 }).is_err());
        assert!(build_grid(&x, GridStrategy::Uniform { count: 3, lo: 1.0, hi: 1.0 }).is_err());
        assert!(SplitGrid::new(vec![vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn counts_follow_tree_side_rule() {
        let g = SplitGrid::new(vec![vec![0.25, 0.5, 0.75]]).unwrap();
        let c = count_splits(&g, &[0.1], &[0.6]).unwrap();
        assert_eq!((c.below[0], c.between[0], c.above[0]), (0, 2, 1));
        let g = SplitGrid::new(vec![vec![0.5]]).unwrap();
        let c = count_splits(&g, &[0.2], &[0.2]).unwrap();
        assert_eq!((c.below[0], c.between[0], c.above[0]), (0, 0, 1));
        // a cutpoint at the lower coordinate separates: the split sends 0.5 left and 0.7 right
        let c = count_splits(&g, &[0.5], &[0.7]).unwrap();
        assert_eq!(c.between[0], 1);
        let c = count_splits(&g, &[0.3], &[0.5]).unwrap();
        assert_eq!(c.between[0], 0);
        assert!(count_splits(&g, &[0.1, 0.2], &[0.3, 0.1]).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(AxisWeights::new(vec![0.0, 0.0]).is_err());
        assert!(AxisWeights::new(vec![-1.0, 1.0]).is_err());
        assert!(AxisWeights::new(vec![0.0, 2.0]).is_ok());
    }
}
