//! BFGS quasi-Newton minimization with a strong-Wolfe line search.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient norm falls below this.
    pub gtol: f64,
    /// Cap on the largest coordinate change of the first trial step.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 200, gtol: 1e-6, max_step: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub inv_hessian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

struct Point {
    a: f64,
    f: f64,
    g: DVector<f64>,
    d: f64,
}

/// Minimizes `f`, which returns the value and gradient. Non-finite values
/// are treated as failed trial steps.
pub fn minimize<F>(mut f: F, x0: DVector<f64>, opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut h = DMatrix::identity(n, n);
    let mut first = true;
    for it in 0..opts.max_iter {
        if g.norm() <= opts.gtol {
            return BfgsResult { x, f: fx, grad: g, inv_hessian: h, iterations: it, converged: true, message: "gradient tolerance reached".into() };
        }
        let mut p = -(&h * &g);
        let mut d0 = g.dot(&p);
        if !(d0 < 0.0) {
            // not a descent direction: restart from steepest descent
            h = DMatrix::identity(n, n);
            p = -g.clone();
            d0 = g.dot(&p);
        }
        let mut a0 = 1.0;
        let pmax = p.amax();
        if first && pmax > opts.max_step {
            a0 = opts.max_step / pmax;
        }
        let Some(pt) = line_search(&mut f, &x, fx, d0, &p, a0) else {
            return BfgsResult { x, f: fx, grad: g, inv_hessian: h, iterations: it, converged: false, message: "line search failed".into() };
        };
        let s = &p * pt.a;
        let yv = &pt.g - &g;
        let sy = s.dot(&yv);
        if first && sy > 0.0 {
            h *= sy / yv.dot(&yv);
        }
        first = false;
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ, expanded
            h += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let df = fx - pt.f;
        x += s;
        fx = pt.f;
        g = pt.g;
        if df.abs() <= 1e-15 * fx.abs().max(1.0) && g.norm() <= 1e3 * opts.gtol {
            return BfgsResult { x, f: fx, grad: g, inv_hessian: h, iterations: it + 1, converged: true, message: "objective stalled near stationarity".into() };
        }
    }
    BfgsResult { x, f: fx, grad: g, inv_hessian: h, iterations: opts.max_iter, converged: false, message: "maximum iterations reached".into() }
}

fn line_search<F>(f: &mut F, x: &DVector<f64>, f0: f64, d0: f64, p: &DVector<f64>, a0: f64) -> Option<Point>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut eval = |a: f64| {
        let (fa, ga) = f(&(x + p * a));
        let d = ga.dot(p);
        Point { a, f: fa, g: ga, d }
    };
    let mut prev = Point { a: 0.0, f: f0, g: DVector::zeros(0), d: d0 };
    let mut a = a0;
    for i in 0..40 {
        let cur = eval(a);
        if !cur.f.is_finite() {
            a = 0.5 * (prev.a + a);
            if a - prev.a < 1e-16 {
                return None;
            }
            continue;
        }
        if cur.f > f0 + C1 * a * d0 || (i > 0 && cur.f >= prev.f) {
            return zoom(&mut eval, prev, cur, f0, d0);
        }
        if cur.d.abs() <= -C2 * d0 {
            return Some(cur);
        }
        if cur.d >= 0.0 {
            return zoom(&mut eval, cur, prev, f0, d0);
        }
        prev = cur;
        a *= 2.0;
    }
    None
}

fn zoom<E>(eval: &mut E, mut lo: Point, mut hi: Point, f0: f64, d0: f64) -> Option<Point>
where
    E: FnMut(f64) -> Point,
{
    for _ in 0..40 {
        let (a_lo, a_hi) = (lo.a, hi.a);
        let span = a_hi - a_lo;
        // quadratic through (lo.f, lo.d) and hi.f, kept away from the ends
        let denom = 2.0 * (hi.f - lo.f - lo.d * span);
        let mut a = if denom.is_finite() && denom > 0.0 { a_lo - lo.d * span * span / denom } else { a_lo + 0.5 * span };
        let (l, u) = if a_lo < a_hi { (a_lo, a_hi) } else { (a_hi, a_lo) };
        let margin = 0.1 * (u - l);
        if !(a > l + margin && a < u - margin) {
            a = 0.5 * (l + u);
        }
        if (u - l) < 1e-14 * u.abs().max(1e-10) {
            break;
        }
        let cur = eval(a);
        if !cur.f.is_finite() || cur.f > f0 + C1 * a * d0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.d.abs() <= -C2 * d0 {
                return Some(cur);
            }
            if cur.d * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // accept the best point with sufficient decrease if the curvature test never passed
    (lo.a > 0.0 && lo.f < f0).then_some(lo)
}
