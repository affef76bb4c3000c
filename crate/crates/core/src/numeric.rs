//! Small numerical kernels shared by the models: adaptive quadrature,
//! bracketing root search and golden-section maximization.

use crate::error::{Error, Result};

/// Default absolute tolerance for [`integrate`].
pub const QUAD_TOL: f64 = 1e-10;
/// Recursion depth cap for adaptive Simpson.
pub const QUAD_MAX_DEPTH: u32 = 40;

/// Adaptive composite Simpson quadrature of `f` over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_with_depth(f, a, b, tol, QUAD_MAX_DEPTH)
}

pub fn integrate_with_depth<F>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Integration(format!("non-finite bounds [{a}, {b}]")));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let value = simpson_step(&f, a, b, fa, fm, fb, whole, tol, max_depth);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Integration(format!(
            "non-finite integrand on [{a}, {b}]"
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || !delta.is_finite() {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integrate over `[a, b]`, splitting at the given interior knots first.
pub fn integrate_with_knots<F>(f: F, a: f64, b: f64, knots: &[f64], tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut cuts: Vec<f64> = knots.iter().copied().filter(|&k| k > a && k < b).collect();
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut lo = a;
    let pieces = cuts.len() + 1;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        total += integrate(&f, lo, hi, tol / pieces as f64)?;
        lo = hi;
    }
    Ok(total)
}

/// Smallest point of `[lo, hi]` where a nondecreasing function `g` turns
/// nonnegative. Returns `lo` if `g(lo) >= 0` and `hi` if `g(hi) <= 0`.
pub fn monotone_root<G>(g: G, mut lo: f64, mut hi: f64) -> f64
where
    G: Fn(f64) -> f64,
{
    if g(lo) >= 0.0 {
        return lo;
    }
    if g(hi) <= 0.0 {
        return hi;
    }
    // Invariant: g(lo) < 0 < g(hi).
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            return mid;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for the maximizer of a unimodal `f` on `[a, b]`.
pub fn golden_max<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Golden-section search for the minimizer of a unimodal `f` on `[a, b]`.
pub fn golden_min<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    golden_max(|x| -f(x), a, b, tol)
}

/// Minimizer of a smooth function on `[a, b]`: a grid scan brackets the
/// minimum, then bisection on a Richardson-extrapolated central difference of
/// `f` pins the stationary point. Endpoint minima are returned as is.
pub fn minimize_smooth<F>(f: F, a: f64, b: f64, grid: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let grid = grid.max(2);
    let xs: Vec<f64> = (0..=grid)
        .map(|i| a + (b - a) * i as f64 / grid as f64)
        .collect();
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let v = f(x)?;
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    if best == 0 || best == grid {
        return Ok(xs[best]);
    }
    let h = 1e-4 * (b - a);
    let lo = xs[best - 1].max(a + h);
    let hi = xs[best + 1].min(b - h);
    let failure = std::cell::RefCell::new(None);
    let eval = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let central = |x: f64, h: f64| (eval(x + h) - eval(x - h)) / (2.0 * h);
    let slope = |x: f64| (4.0 * central(x, 0.5 * h) - central(x, h)) / 3.0;
    let root = monotone_root(slope, lo, hi);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(root),
    }
}
