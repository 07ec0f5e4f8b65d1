//! Stationary kernels used for comparison with the BART correlation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComparisonKernel {
    /// `exp(−η‖x−x′‖₁)`.
    Laplace { eta: f64 },
    /// Laplace kernel rescaled to take the value `1 − α` at opposite corners
    /// of the unit cube.
    ShiftedLaplace { eta: f64, alpha: f64 },
    /// `1 − α + α(1 − ‖x−x′‖₁/p)^q`.
    Power { q: f64, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonValue {
    pub value: f64,
    /// False for the power kernel with non-integer `q`, where positive
    /// definiteness is not established.
    pub psd_proven: bool,
}

impl ComparisonKernel {
    fn validate(&self) -> Result<()> {
        let check_alpha = |a: f64| {
            if (0.0..=1.0).contains(&a) {
                Ok(())
            } else {
                Err(invalid(format!("alpha must lie in [0, 1], got {a}")))
            }
        };
        match *self {
            Self::Laplace { eta } | Self::ShiftedLaplace { eta, .. } if !(eta > 0.0 && eta.is_finite()) => {
                Err(invalid(format!("eta must be finite and > 0, got {eta}")))
            }
            Self::Laplace { .. } => Ok(()),
            Self::ShiftedLaplace { alpha, .. } => check_alpha(alpha),
            Self::Power { q, alpha } => {
                if !(q >= 1.0 && q.is_finite()) {
                    return Err(invalid(format!("q must be finite and >= 1, got {q}")));
                }
                check_alpha(alpha)
            }
        }
    }

    fn needs_unit_cube(&self) -> bool {
        !matches!(self, Self::Laplace { .. })
    }

    pub fn psd_proven(&self) -> bool {
        match *self {
            Self::Power { q, .. } => q.fract() == 0.0,
            _ => true,
        }
    }
}

pub fn comparison_kernel(x: &[f64], x2: &[f64], kind: ComparisonKernel) -> Result<ComparisonValue> {
    kind.validate()?;
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: x2.len() });
    }
    if x.is_empty() {
        return Err(Error::Empty("point coordinates"));
    }
    if x.iter().chain(x2).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("point coordinates"));
    }
    if kind.needs_unit_cube() && x.iter().chain(x2).any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid("points must lie in the unit cube"));
    }
    let l1: f64 = x.iter().zip(x2).map(|(a, b)| (a - b).abs()).sum();
    let p = x.len() as f64;
    let value = match kind {
        ComparisonKernel::Laplace { eta } => (-eta * l1).exp(),
        ComparisonKernel::ShiftedLaplace { eta, alpha } => {
            if alpha == 0.0 {
                1.0
            } else {
                let ea = eta * alpha;
                // (e^{−ηα r} − e^{−ηα})/(1 − e^{−ηα}) written with expm1 for small ηα
                let num = (-ea * l1 / p).exp_m1() - (-ea).exp_m1();
                1.0 - alpha + alpha * num / -(-ea).exp_m1()
            }
        }
        ComparisonKernel::Power { q, alpha } => 1.0 - alpha + alpha * (1.0 - l1 / p).powf(q),
    };
    Ok(ComparisonValue { value, psd_proven: kind.psd_proven() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_laplace_endpoints() {
        let k = ComparisonKernel::ShiftedLaplace { eta: 1.0, alpha: 0.95 };
        let x = [0.2, 0.7];
        assert!((comparison_kernel(&x, &x, k).unwrap().value - 1.0).abs() < 1e-15);
        let v = comparison_kernel(&[0.0, 1.0], &[1.0, 0.0], k).unwrap().value;
        assert!((v - 0.05).abs() < 1e-12);
    }

    #[test]
    fn shifted_laplace_small_eta_is_linear() {
        let k = ComparisonKernel::ShiftedLaplace { eta: 1e-4, alpha: 0.9 };
        let (x, y) = ([0.1, 0.5, 0.3], [0.9, 0.2, 0.3]);
        let l1 = 0.8 + 0.3;
        let v = comparison_kernel(&x, &y, k).unwrap().value;
        assert!((v - (1.0 - 0.9 * l1 / 3.0)).abs() < 1e-3);
    }

    #[test]
    fn laplace_and_power() {
        let v = comparison_kernel(&[0.0], &[2.0], ComparisonKernel::Laplace { eta: 0.5 }).unwrap();
        assert!((v.value - (-1.0f64).exp()).abs() < 1e-15);
        let k = ComparisonKernel::Power { q: 2.5, alpha: 0.9 };
        let v = comparison_kernel(&[0.0], &[1.0], k).unwrap();
        assert!((v.value - 0.1).abs() < 1e-15);
        assert!(!v.psd_proven);
        assert!(ComparisonKernel::Power { q: 2.0, alpha: 0.5 }.psd_proven());
    }

    #[test]
    fn domain_errors() {
        let k = ComparisonKernel::ShiftedLaplace { eta: 1.0, alpha: 0.5 };
        assert!(comparison_kernel(&[1.5], &[0.0], k).is_err());
        assert!(comparison_kernel(&[0.5], &[0.0], ComparisonKernel::Laplace { eta: 0.0 }).is_err());
        assert!(comparison_kernel(&[0.5], &[0.0], ComparisonKernel::Power { q: 0.5, alpha: 0.5 }).is_err());
        assert!(comparison_kernel(&[0.5], &[0.0, 1.0], ComparisonKernel::Laplace { eta: 1.0 }).is_err());
    }
}
