use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::linalg::EigenCache;
use crate::error::{invalid, Error, Result};
use crate::special::trigamma;
use crate::transform::chi2_quantile;

/// Scaled-inverse-χ² prior `λν/σ² ~ χ²_ν`; `q` records the quantile used to
/// pick `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePrior {
    pub nu: f64,
    pub lambda: f64,
    pub q: f64,
}

impl NoisePrior {
    pub fn new(nu: f64, lambda: f64, q: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite() && lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("noise prior needs nu > 0 and lambda > 0, got {nu}, {lambda}")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(invalid(format!("quantile q must lie in (0, 1), got {q}")));
        }
        Ok(Self { nu, lambda, q })
    }

    /// Log density of `t = log σ²`, Jacobian included.
    pub fn log_density(&self, t: f64) -> f64 {
        let h = self.nu / 2.0;
        let x = self.lambda * self.nu * (-t).exp();
        h * x.ln() - x / 2.0 - h * std::f64::consts::LN_2 - ln_gamma(h)
    }

    /// Prior standard deviation of `log σ²`.
    pub fn log_sd(&self) -> f64 {
        trigamma(self.nu / 2.0).sqrt()
    }
}

/// Outcome of [`set_lambda_from_ols`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaFit {
    pub lambda: f64,
    /// Residual variance estimate the prior was calibrated against.
    pub sigma2_hat: f64,
    /// The design was rank deficient and the variance of `y` was used.
    pub rank_deficient: bool,
    /// `λ` hit the floor `1e-12·var(y)`.
    pub floored: bool,
}

/// Chooses `λ` so that `P(σ < σ̂_OLS) = q` under the prior, with `σ̂²_OLS`
/// the residual variance of a least-squares fit with intercept.
pub fn set_lambda_from_ols(x: &DMatrix<f64>, y: &DVector<f64>, nu: f64, q: f64) -> Result<LambdaFit> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n <= p + 1 {
        return Err(invalid(format!("need n > p + 1 observations, got n = {n}, p = {p}")));
    }
    if !(nu > 0.0) || !(q > 0.0 && q < 1.0) {
        return Err(invalid("need nu > 0 and q in (0, 1)"));
    }
    let mean = y.mean();
    let var_y = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let mut design = DMatrix::from_element(n, p + 1, 1.0);
    design.view_mut((0, 1), (n, p)).copy_from(x);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
    let (sigma2_hat, rank_deficient) = if rank < p + 1 {
        (var_y, true)
    } else {
        let coef = svd.solve(y, 1e-10 * smax).map_err(|e| Error::Numerical(e.to_string()))?;
        let resid = y - &design * coef;
        (resid.norm_squared() / (n - p - 1) as f64, false)
    };
    // P(σ² < σ̂²) = P(χ²_ν > λν/σ̂²) = q
    let raw = sigma2_hat * chi2_quantile(nu, 1.0 - q) / nu;
    let floor = if var_y > 0.0 { 1e-12 * var_y } else { 1e-12 };
    Ok(LambdaFit { lambda: raw.max(floor), sigma2_hat, rank_deficient, floored: raw < floor })
}

/// Unnormalized log posterior of `t = log σ²` given residuals rotated into
/// the eigenbasis of the prior covariance.
#[derive(Debug, Clone)]
pub struct NoisePosterior {
    values: Vec<f64>,
    rotated_sq: Vec<f64>,
    prior: NoisePrior,
}

impl NoisePosterior {
    pub fn new(y: &DVector<f64>, eigen: &EigenCache, prior: NoisePrior, prior_mean: f64) -> Result<Self> {
        if y.len() != eigen.dim() {
            return Err(Error::DimensionMismatch { expected: eigen.dim(), got: y.len() });
        }
        let r = eigen.rotate(&y.map(|v| v - prior_mean));
        Ok(Self {
            values: eigen.values.iter().copied().collect(),
            rotated_sq: r.iter().map(|v| v * v).collect(),
            prior,
        })
    }

    pub fn log_density(&self, t: f64) -> f64 {
        let s2 = t.exp();
        let n = self.values.len() as f64;
        let mut quad = 0.0;
        let mut logdet = 0.0;
        for (d, r2) in self.values.iter().zip(&self.rotated_sq) {
            let v = d + s2;
            quad += r2 / v;
            logdet += v.ln();
        }
        -0.5 * quad - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln() + self.prior.log_density(t)
    }

    pub fn prior(&self) -> &NoisePrior {
        &self.prior
    }

    /// Mode of the log density in `t`.
    pub fn mode(&self) -> Result<f64> {
        let sd = self.prior.log_sd();
        let c_prior = self.prior.lambda.ln();
        let n = self.rotated_sq.len().max(1) as f64;
        let ms = self.rotated_sq.iter().sum::<f64>() / n;
        let c_data = if ms > 0.0 { ms.ln() } else { c_prior };
        let lo = c_prior.min(c_data) - 40.0 * sd;
        let hi = c_prior.max(c_data) + 40.0 * sd;
        let f = |t: f64| self.log_density(t);
        let m = grid_then_golden(&f, lo, hi, 4000, true)?;
        if m <= lo || m >= hi {
            return Err(Error::Bracket(format!("noise posterior mode at search edge ({m:.3} in [{lo:.3}, {hi:.3}])")));
        }
        Ok(m)
    }
}

/// Maximizes `f` on `[lo, hi]` by a grid scan then golden-section refinement
/// (or minimizes if `maximize` is false).
fn grid_then_golden(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize, maximize: bool) -> Result<f64> {
    let sign = if maximize { 1.0 } else { -1.0 };
    let g = |t: f64| {
        let v = sign * f(t);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let step = (hi - lo) / n as f64;
    let (mut best, mut best_v) = (lo, g(lo));
    for i in 1..=n {
        let t = lo + step * i as f64;
        let v = g(t);
        if v > best_v {
            best = t;
            best_v = v;
        }
    }
    if !best_v.is_finite() {
        return Err(Error::Numerical("objective not finite anywhere on the search grid".into()));
    }
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * (1.0 + best.abs()) {
            break;
        }
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - ratio * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + ratio * (b - a);
            gd = g(d);
        }
    }
    let t = 0.5 * (a + b);
    Ok(if g(t) >= best_v { t } else { best })
}

pub fn noise_logpost(log_sigma2: f64, y: &DVector<f64>, eigen: &EigenCache, prior: &NoisePrior, prior_mean: f64) -> Result<f64> {
    Ok(NoisePosterior::new(y, eigen, *prior, prior_mean)?.log_density(log_sigma2))
}

/// Draws of `σ²` with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraws {
    pub sigma2: Vec<f64>,
    pub acceptance_rate: f64,
    pub log_mode: f64,
    /// Ratio-of-uniforms box `[v_lo, v_hi]` for `u ∈ (0, 1]`.
    pub v_range: (f64, f64),
}

/// Ratio-of-uniforms sampler for `log σ²`, centred at the mode.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    post: NoisePosterior,
    mode: f64,
    peak: f64,
    v_lo: f64,
    v_hi: f64,
    bracket: (f64, f64),
}

impl NoiseSampler {
    pub fn new(post: NoisePosterior) -> Result<Self> {
        let mode = post.mode()?;
        let peak = post.log_density(mode);
        let half = 40.0 * post.prior.log_sd();
        let (lo, hi) = (mode - half, mode + half);
        for edge in [lo, hi] {
            let drop = post.log_density(edge) - peak;
            if !(drop < -30.0) {
                return Err(Error::Bracket(format!(
                    "posterior mass escapes [{lo:.3}, {hi:.3}]: log density drop {drop:.3} at {edge:.3}"
                )));
            }
        }
        let g = |t: f64| (t - mode) * ((post.log_density(t) - peak) / 2.0).exp();
        let t_hi = grid_then_golden(&g, mode, hi, 2000, true)?;
        let t_lo = grid_then_golden(&g, lo, mode, 2000, false)?;
        // small inflation keeps the box a superset despite the finite search
        let v_hi = 1.01 * g(t_hi).max(0.0);
        let v_lo = 1.01 * g(t_lo).min(0.0);
        Ok(Self { post, mode, peak, v_lo, v_hi, bracket: (lo, hi) })
    }

    pub fn log_mode(&self) -> f64 {
        self.mode
    }

    pub fn bracket(&self) -> (f64, f64) {
        self.bracket
    }

    pub fn posterior(&self) -> &NoisePosterior {
        &self.post
    }

    pub fn sample<R: Rng>(&self, n_draws: usize, rng: &mut R) -> NoiseDraws {
        let mut out = Vec::with_capacity(n_draws);
        let mut tries = 0u64;
        while out.len() < n_draws {
            tries += 1;
            let u: f64 = 1.0 - rng.gen::<f64>();
            let v = self.v_lo + (self.v_hi - self.v_lo) * rng.gen::<f64>();
            let t = self.mode + v / u;
            if 2.0 * u.ln() <= self.post.log_density(t) - self.peak {
                out.push(t.exp());
            }
        }
        NoiseDraws {
            acceptance_rate: n_draws as f64 / tries.max(1) as f64,
            sigma2: out,
            log_mode: self.mode,
            v_range: (self.v_lo, self.v_hi),
        }
    }
}

pub fn sample_noise_posterior<R: Rng>(
    y: &DVector<f64>,
    eigen: &EigenCache,
    prior: &NoisePrior,
    prior_mean: f64,
    n_draws: usize,
    rng: &mut R,
) -> Result<NoiseDraws> {
    if n_draws == 0 {
        return Err(invalid("n_draws must be >= 1"));
    }
    let sampler = NoiseSampler::new(NoisePosterior::new(y, eigen, *prior, prior_mean)?)?;
    Ok(sampler.sample(n_draws, rng))
}
