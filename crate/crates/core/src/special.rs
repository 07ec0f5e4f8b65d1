//! Special functions used by the closed-form kernel and the noise prior.

use crate::error::{invalid, Result};

/// Digamma function ψ(x) for x > 0.
///
/// Shifts the argument to x ≥ 10 with ψ(x) = ψ(x+1) − 1/x, then applies the
/// asymptotic series.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid(format!("digamma needs finite x > 0, got {x}")));
    }
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift += 1.0 / x;
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    // Bernoulli-number coefficients B_{2k}/(2k)
    let series = z
        * (1.0 / 12.0
            - z * (1.0 / 120.0
                - z * (1.0 / 252.0 - z * (1.0 / 240.0 - z * (1.0 / 132.0 - z * (691.0 / 32760.0))))));
    x.ln() - 0.5 / x - series - shift
}

/// Trigamma ψ'(x) for x > 0, same shift-and-series scheme.
pub fn trigamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    let series = 1.0 / x
        + z / 2.0
        + z / x * (1.0 / 6.0 - z * (1.0 / 30.0 - z * (1.0 / 42.0 - z * (1.0 / 30.0 - z * (5.0 / 66.0)))));
    series + shift
}

/// ψ(1), …, ψ(len) in a lookup table; `get(n)` is bit-identical to
/// `digamma(n)`.
#[derive(Debug, Clone)]
pub struct DigammaTable {
    values: Vec<f64>,
}

impl DigammaTable {
    pub fn new(max_arg: usize) -> Self {
        let values = (0..=max_arg)
            .map(|n| if n == 0 { f64::NAN } else { digamma_unchecked(n as f64) })
            .collect();
        Self { values }
    }

    #[inline]
    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn max_arg(&self) -> usize {
        self.values.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_and_harmonic_identity() {
        let psi1 = digamma(1.0).unwrap();
        assert!((digamma(2.0).unwrap() - psi1 - 1.0).abs() < 1e-14);
        let mut h = 0.0;
        for n in 2..=50 {
            h += 1.0 / (n - 1) as f64;
            assert!((digamma(n as f64).unwrap() - psi1 - h).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn euler_gamma_from_harmonic_limit() {
        // H_N − ln N − 1/(2N) + 1/(12N²) converges to γ_E with O(N⁻⁴) error
        let n = 100_000usize;
        let h: f64 = (1..=n).rev().map(|k| 1.0 / k as f64).sum();
        let nf = n as f64;
        let gamma_e = h - nf.ln() - 0.5 / nf + 1.0 / (12.0 * nf * nf);
        assert!((digamma(1.0).unwrap() + gamma_e).abs() < 1e-12);
        assert!((digamma(1.0).unwrap() + 0.577_215_664_901_53).abs() < 1e-13);
    }

    #[test]
    fn half_integer_and_domain() {
        // ψ(1/2) = −γ_E − 2 ln 2
        let expect = -0.577_215_664_901_532_9 - 2.0 * std::f64::consts::LN_2;
        assert!((digamma(0.5).unwrap() - expect).abs() < 1e-12);
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
    }

    #[test]
    fn trigamma_values() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-12);
        assert!((trigamma(2.0) - (pi2_6 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn table_matches_scalar() {
        let t = DigammaTable::new(200);
        for n in 1..=200 {
            assert_eq!(t.get(n).to_bits(), digamma(n as f64).unwrap().to_bits());
        }
    }
}
