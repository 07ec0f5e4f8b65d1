//! Maps between hyperparameters and standard-normal coordinates `z` under
//! their priors: `α ~ Beta(2,1)`, `β ~ InvGamma(1,1)`, `log k ~ N(log 2, 2²)`,
//! and `λν/σ² ~ χ²_ν`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{invalid, Result};

/// Hyperparameters that enter the kernel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelParam {
    Alpha,
    Beta,
    LogK,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid")
}

pub fn norm_cdf(z: f64) -> f64 {
    // statrs' erfc is only good to about 1e-11
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    std_normal().pdf(z)
}

/// `Φ⁻¹(u)`: the library inverse plus one Newton step against [`norm_cdf`].
pub fn norm_quantile(u: f64) -> f64 {
    let z = std_normal().inverse_cdf(u);
    let pdf = norm_pdf(z);
    if !z.is_finite() || pdf <= 0.0 {
        return z;
    }
    z - (norm_cdf(z) - u) / pdf
}

/// `ln Φ(z)`, accurate for large positive `z`.
fn ln_norm_cdf(z: f64) -> f64 {
    if z > 0.0 {
        (-norm_cdf(-z)).ln_1p()
    } else {
        norm_cdf(z).ln()
    }
}

pub fn alpha_from_z(z: f64) -> f64 {
    norm_cdf(z).sqrt()
}

pub fn z_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha = {alpha} is not in the open interval (0, 1)")));
    }
    Ok(norm_quantile(alpha * alpha))
}

pub fn dalpha_dz(z: f64) -> f64 {
    norm_pdf(z) / (2.0 * alpha_from_z(z))
}

pub fn beta_from_z(z: f64) -> f64 {
    -1.0 / ln_norm_cdf(z)
}

pub fn z_from_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta = {beta} is not in (0, inf)")));
    }
    // Φ(z) = exp(−1/β); use the upper tail when it is small
    let upper = -(-1.0 / beta).exp_m1();
    Ok(if upper < 0.5 { -norm_quantile(upper) } else { norm_quantile((-1.0 / beta).exp()) })
}

pub fn dbeta_dz(z: f64) -> f64 {
    let l = ln_norm_cdf(z);
    // d/dz (−1/ln Φ) = φ/(Φ (ln Φ)²)
    norm_pdf(z) / (norm_cdf(z) * l * l)
}

pub const LOG_K_MEAN: f64 = std::f64::consts::LN_2;
pub const LOG_K_SD: f64 = 2.0;

pub fn log_k_from_z(z: f64) -> f64 {
    LOG_K_MEAN + LOG_K_SD * z
}

pub fn z_from_log_k(log_k: f64) -> f64 {
    (log_k - LOG_K_MEAN) / LOG_K_SD
}

/// Solves `f(x) = target` for increasing or decreasing `f` by bisection in
/// `ln x` over `[1e-300, 1e300]`.
fn solve_log(target: f64, increasing: bool, f: impl Fn(f64) -> f64) -> f64 {
    let (mut a, mut b) = (-690.0f64, 690.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let v = f(m.exp());
        if (v < target) == increasing {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 * (1.0 + m.abs()) {
            break;
        }
    }
    (0.5 * (a + b)).exp()
}

/// `x` with `P(χ²_ν ≤ x) = u`.
pub fn chi2_quantile(nu: f64, u: f64) -> f64 {
    if u <= 0.5 {
        solve_log(u, true, |x| gamma_lr(nu / 2.0, x / 2.0))
    } else {
        solve_log(1.0 - u, false, |x| gamma_ur(nu / 2.0, x / 2.0))
    }
}

/// σ² at standard-normal coordinate `z` under `λν/σ² ~ χ²_ν`.
pub fn sigma2_from_z(z: f64, nu: f64, lambda: f64) -> f64 {
    // P(σ² ≤ s) = Q(λν/s), Q the χ² survival function
    let x = if z < 0.0 {
        let u = norm_cdf(z);
        solve_log(u, false, |x| gamma_ur(nu / 2.0, x / 2.0))
    } else {
        let v = norm_cdf(-z);
        solve_log(v, true, |x| gamma_lr(nu / 2.0, x / 2.0))
    };
    lambda * nu / x
}

pub fn z_from_sigma2(sigma2: f64, nu: f64, lambda: f64) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!("sigma2 = {sigma2} is not in (0, inf)")));
    }
    let x = lambda * nu / sigma2;
    let q = gamma_ur(nu / 2.0, x / 2.0);
    Ok(if q < 0.5 { norm_quantile(q) } else { -norm_quantile(gamma_lr(nu / 2.0, x / 2.0)) })
}

/// `dσ²/dz` for [`sigma2_from_z`].
pub fn dsigma2_dz(z: f64, nu: f64, lambda: f64) -> f64 {
    let s2 = sigma2_from_z(z, nu, lambda);
    let x = lambda * nu / s2;
    let chi = statrs::distribution::ChiSquared::new(nu).expect("nu > 0");
    // σ² = λν/x, dx/dz = −φ(z)/f(x)
    lambda * nu / (x * x) * norm_pdf(z) / chi.pdf(x)
}
