//! Income distributions represented by quantile functions, with Lorenz
//! curves, means and Gini coefficients.
//!
//! A quantile function `q: [0,1] -> [0, inf)` is nondecreasing; `q(x)` is the
//! income of the agent richer than exactly an `x` fraction of the population.
//! Every integral the rest of the crate needs reduces to the four partial
//! moments `∫ x^k q(x)^{±1} dx` for `k ∈ {0, 1}`, which are computed in closed
//! form wherever the representation allows it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{integrate, integrate_with_knots, QUAD_TOL};

/// Which power of the income a partial moment integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Power {
    /// `q(x)`
    Direct,
    /// `1 / q(x)`
    Inverse,
}

/// One piece of an income transform: on `(previous end, end]` the value is
/// `linear * q(x) + shift + inverse / q(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncomePiece {
    pub end: f64,
    pub linear: f64,
    pub shift: f64,
    pub inverse: f64,
}

impl IncomePiece {
    fn apply(&self, q: f64) -> f64 {
        let mut v = self.linear * q + self.shift;
        if self.inverse != 0.0 {
            v += self.inverse / q;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    PowerLaw {
        beta: f64,
        scale: f64,
        floor: f64,
    },
    Piecewise {
        values: Vec<f64>,
    },
    Tabulated {
        knots: Vec<(f64, f64)>,
    },
    Transformed {
        base: Box<QuantileFunction>,
        pieces: Vec<IncomePiece>,
    },
}

/// An income distribution given by its nondecreasing quantile map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantileSpec", into = "QuantileSpec")]
pub struct QuantileFunction {
    kind: Kind,
}

/// JSON schema of a [`QuantileFunction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantileSpec {
    PowerLaw {
        beta: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        floor: f64,
    },
    Piecewise {
        values: Vec<f64>,
    },
    Tabulated {
        knots: Vec<[f64; 2]>,
    },
    Transformed {
        base: Box<QuantileSpec>,
        pieces: Vec<IncomePiece>,
    },
}

fn one() -> f64 {
    1.0
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl TryFrom<QuantileSpec> for QuantileFunction {
    type Error = Error;

    fn try_from(spec: QuantileSpec) -> Result<Self> {
        match spec {
            QuantileSpec::PowerLaw { beta, scale, floor } => {
                QuantileFunction::power_law_with_floor(beta, scale, floor)
            }
            QuantileSpec::Piecewise { values } => QuantileFunction::piecewise(values),
            QuantileSpec::Tabulated { knots } => {
                QuantileFunction::tabulated(knots.into_iter().map(|[x, q]| (x, q)).collect())
            }
            QuantileSpec::Transformed { base, pieces } => {
                QuantileFunction::transformed(QuantileFunction::try_from(*base)?, pieces)
            }
        }
    }
}

impl From<QuantileFunction> for QuantileSpec {
    fn from(q: QuantileFunction) -> Self {
        match q.kind {
            Kind::PowerLaw { beta, scale, floor } => QuantileSpec::PowerLaw { beta, scale, floor },
            Kind::Piecewise { values } => QuantileSpec::Piecewise { values },
            Kind::Tabulated { knots } => QuantileSpec::Tabulated {
                knots: knots.into_iter().map(|(x, q)| [x, q]).collect(),
            },
            Kind::Transformed { base, pieces } => QuantileSpec::Transformed {
                base: Box::new((*base).into()),
                pieces,
            },
        }
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be finite, got {v}")))
    }
}

/// `∫_lo^hi x^k dx`
fn poly_moment(lo: f64, hi: f64, k: u8) -> f64 {
    match k {
        0 => hi - lo,
        _ => 0.5 * (hi * hi - lo * lo),
    }
}

/// `∫_lo^hi x^e dx` for `e > -1` (or `lo > 0`).
fn monomial_integral(lo: f64, hi: f64, e: f64) -> Result<f64> {
    let p = e + 1.0;
    if p.abs() < 1e-15 {
        if lo <= 0.0 {
            return Err(Error::Integration("divergent ∫ dx/x at 0".into()));
        }
        return Ok((hi / lo).ln());
    }
    if p < 0.0 && lo <= 0.0 {
        return Err(Error::Integration(format!("divergent ∫ x^{e} dx at 0")));
    }
    Ok((hi.powf(p) - lo.powf(p)) / p)
}

impl QuantileFunction {
    /// `q(x) = scale · x^beta`.
    pub fn power_law(beta: f64, scale: f64) -> Result<Self> {
        Self::power_law_with_floor(beta, scale, 0.0)
    }

    /// `q(x) = floor + scale · x^beta`; a positive floor keeps `q(0) > 0`.
    pub fn power_law_with_floor(beta: f64, scale: f64, floor: f64) -> Result<Self> {
        finite(beta, "beta")?;
        finite(scale, "scale")?;
        finite(floor, "floor")?;
        if beta < 0.0 {
            return Err(invalid(format!("beta must be nonnegative, got {beta}")));
        }
        if scale <= 0.0 {
            return Err(invalid(format!("scale must be positive, got {scale}")));
        }
        if floor < 0.0 {
            return Err(invalid(format!("floor must be nonnegative, got {floor}")));
        }
        Ok(Self {
            kind: Kind::PowerLaw { beta, scale, floor },
        })
    }

    /// The distribution `q(x) = (β+1)·x^β`, which has mean 1.
    pub fn unit_mean_power_law(beta: f64) -> Result<Self> {
        Self::power_law(beta, beta + 1.0)
    }

    /// Everybody earns `c`.
    pub fn constant(c: f64) -> Result<Self> {
        Self::power_law(0.0, c)
    }

    /// Equal-mass cells: cell `i` (0-based) covers `(i/n, (i+1)/n]`.
    pub fn piecewise(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("piecewise income needs at least one cell"));
        }
        for w in values.windows(2) {
            if w[1] < w[0] {
                return Err(invalid("piecewise income values must be nondecreasing"));
            }
        }
        for &v in &values {
            finite(v, "income")?;
            if v <= 0.0 {
                return Err(invalid(format!(
                    "piecewise incomes must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            kind: Kind::Piecewise { values },
        })
    }

    /// Monotone piecewise-linear interpolation through `(x, q(x))` knots that
    /// start at `x = 0` and end at `x = 1`.
    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(invalid("tabulated income needs at least two knots"));
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(invalid("tabulated knots must span [0, 1]"));
        }
        for &(x, q) in &knots {
            finite(x, "knot position")?;
            finite(q, "knot income")?;
            if q < 0.0 {
                return Err(invalid(format!(
                    "tabulated incomes must be nonnegative, got {q}"
                )));
            }
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(invalid(
                    "tabulated knot positions must be strictly increasing",
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(invalid("tabulated incomes must be nondecreasing"));
            }
        }
        Ok(Self {
            kind: Kind::Tabulated { knots },
        })
    }

    /// `x ↦ linear·q(x) + shift + inverse/q(x)` piecewise over `base`.
    ///
    /// The pieces must end at strictly increasing positions, the last at 1, and
    /// the result must stay nonnegative and nondecreasing.
    pub fn transformed(base: QuantileFunction, pieces: Vec<IncomePiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(invalid("transform needs at least one piece"));
        }
        let mut prev = 0.0;
        for p in &pieces {
            finite(p.linear, "piece coefficient")?;
            finite(p.shift, "piece coefficient")?;
            finite(p.inverse, "piece coefficient")?;
            if p.end <= prev {
                return Err(invalid("transform pieces must end at increasing positions"));
            }
            prev = p.end;
        }
        if prev != 1.0 {
            return Err(invalid("last transform piece must end at 1"));
        }
        let q = Self {
            kind: Kind::Transformed {
                base: Box::new(base),
                pieces,
            },
        };
        q.check_transform()?;
        Ok(q)
    }

    fn check_transform(&self) -> Result<()> {
        let Kind::Transformed { base, pieces } = &self.kind else {
            return Ok(());
        };
        let mut start = 0.0;
        let mut prev_end_value = f64::NEG_INFINITY;
        for p in pieces {
            let lo_income = base.eval_right(start);
            let hi_income = base.eval(p.end);
            if p.inverse != 0.0 && lo_income <= 0.0 {
                return Err(Error::NonPositiveIncome { income: lo_income });
            }
            let lo = p.apply(lo_income);
            let hi = p.apply(hi_income);
            if lo < -1e-15 {
                return Err(invalid(format!(
                    "transformed income {lo} is negative at {start}"
                )));
            }
            // Piece maps are monotone in q when linear >= 0 and inverse <= 0.
            if p.linear < 0.0 || p.inverse > 0.0 || lo > hi + 1e-15 {
                return Err(Error::OrderViolation { quantile: start });
            }
            if lo < prev_end_value - 1e-12 * prev_end_value.abs().max(1.0) {
                return Err(Error::OrderViolation { quantile: start });
            }
            prev_end_value = hi;
            start = p.end;
        }
        Ok(())
    }

    /// `q(x)`, left-continuous at jumps.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.kind {
            Kind::PowerLaw { beta, scale, floor } => {
                if *beta == 0.0 {
                    floor + scale
                } else {
                    floor + scale * x.powf(*beta)
                }
            }
            Kind::Piecewise { values } => {
                let n = values.len();
                let idx = ((x * n as f64).ceil() as usize).clamp(1, n) - 1;
                values[idx]
            }
            Kind::Tabulated { knots } => interpolate(knots, x),
            Kind::Transformed { base, pieces } => {
                let p = pieces
                    .iter()
                    .find(|p| x <= p.end)
                    .unwrap_or(&pieces[pieces.len() - 1]);
                p.apply(base.eval(x))
            }
        }
    }

    /// Right limit `q(x+)`.
    pub fn eval_right(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Piecewise { values } => {
                let n = values.len();
                let idx = ((x * n as f64).floor() as usize).min(n - 1);
                values[idx]
            }
            Kind::Transformed { base, pieces } => {
                let p = pieces
                    .iter()
                    .find(|p| x < p.end)
                    .unwrap_or(&pieces[pieces.len() - 1]);
                p.apply(base.eval_right(x))
            }
            _ => self.eval(x),
        }
    }

    /// `inf_x q(x)`.
    pub fn infimum(&self) -> f64 {
        self.eval_right(0.0)
    }

    /// Points of `(0,1)` where `q` may fail to be smooth.
    pub fn knots(&self) -> Vec<f64> {
        match &self.kind {
            Kind::PowerLaw { .. } => Vec::new(),
            Kind::Piecewise { values } => {
                let n = values.len();
                (1..n).map(|i| i as f64 / n as f64).collect()
            }
            Kind::Tabulated { knots } => knots[1..knots.len() - 1].iter().map(|k| k.0).collect(),
            Kind::Transformed { base, pieces } => {
                let mut k = base.knots();
                k.extend(pieces[..pieces.len() - 1].iter().map(|p| p.end));
                k.sort_by(f64::total_cmp);
                k.dedup();
                k
            }
        }
    }

    /// Partial moment `∫_lo^hi x^k q(x)^{±1} dx` for `k ∈ {0, 1}`.
    pub fn moment(&self, lo: f64, hi: f64, k: u8, power: Power) -> Result<f64> {
        debug_assert!(k <= 1);
        let lo = lo.clamp(0.0, 1.0);
        let hi = hi.clamp(0.0, 1.0);
        if hi <= lo {
            return Ok(0.0);
        }
        let kf = k as f64;
        let value = match (&self.kind, power) {
            (Kind::PowerLaw { beta, scale, floor }, Power::Direct) => {
                floor * poly_moment(lo, hi, k) + scale * monomial_integral(lo, hi, kf + beta)?
            }
            (Kind::PowerLaw { beta, scale, floor }, Power::Inverse) => {
                if *floor == 0.0 {
                    monomial_integral(lo, hi, kf - beta)? / scale
                } else if *beta == 0.0 {
                    poly_moment(lo, hi, k) / (floor + scale)
                } else {
                    let (b, s, f) = (*beta, *scale, *floor);
                    integrate(|x| x.powi(k as i32) / (f + s * x.powf(b)), lo, hi, QUAD_TOL)?
                }
            }
            (Kind::Piecewise { values }, _) => {
                let n = values.len() as f64;
                let first = ((lo * n).floor() as usize).min(values.len() - 1);
                let mut acc = 0.0;
                for (i, &v) in values.iter().enumerate().skip(first) {
                    let a = (i as f64 / n).max(lo);
                    let b = ((i + 1) as f64 / n).min(hi);
                    if b <= a {
                        if a >= hi {
                            break;
                        }
                        continue;
                    }
                    let w = if power == Power::Direct { v } else { 1.0 / v };
                    acc += w * poly_moment(a, b, k);
                }
                acc
            }
            (Kind::Tabulated { knots }, Power::Direct) => {
                // Simpson is exact for the quadratic integrand on each segment.
                let mut acc = 0.0;
                for w in knots.windows(2) {
                    let a = w[0].0.max(lo);
                    let b = w[1].0.min(hi);
                    if b <= a {
                        continue;
                    }
                    let f = |x: f64| x.powi(k as i32) * interpolate(knots, x);
                    let m = 0.5 * (a + b);
                    acc += (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
                }
                acc
            }
            (Kind::Tabulated { knots }, Power::Inverse) => {
                if interpolate(knots, lo) <= 0.0 {
                    return Err(Error::NonPositiveIncome {
                        income: interpolate(knots, lo),
                    });
                }
                integrate_with_knots(
                    |x| x.powi(k as i32) / interpolate(knots, x),
                    lo,
                    hi,
                    &self.knots(),
                    QUAD_TOL,
                )?
            }
            (Kind::Transformed { base, pieces }, Power::Direct) => {
                let mut acc = 0.0;
                let mut start: f64 = 0.0;
                for p in pieces {
                    let a = start.max(lo);
                    let b = p.end.min(hi);
                    start = p.end;
                    if b <= a {
                        continue;
                    }
                    if p.linear != 0.0 {
                        acc += p.linear * base.moment(a, b, k, Power::Direct)?;
                    }
                    if p.shift != 0.0 {
                        acc += p.shift * poly_moment(a, b, k);
                    }
                    if p.inverse != 0.0 {
                        acc += p.inverse * base.moment(a, b, k, Power::Inverse)?;
                    }
                }
                acc
            }
            (Kind::Transformed { .. }, Power::Inverse) => integrate_with_knots(
                |x| x.powi(k as i32) / self.eval(x),
                lo,
                hi,
                &self.knots(),
                QUAD_TOL,
            )?,
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Integration(format!(
                "non-finite moment on [{lo}, {hi}]"
            )))
        }
    }

    /// `μ = ∫_0^1 q(x) dx`.
    pub fn mean(&self) -> Result<f64> {
        self.moment(0.0, 1.0, 0, Power::Direct)
    }

    /// Cumulative income `Q(t) = ∫_0^t q(x) dx`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        self.moment(0.0, t, 0, Power::Direct)
    }

    pub fn lorenz(&self) -> Result<LorenzCurve> {
        let mean = self.mean()?;
        if !(mean > 0.0) {
            return Err(Error::UndefinedGini { mean });
        }
        Ok(LorenzCurve {
            income: self.clone(),
            mean,
        })
    }

    /// `G = 1 − 2∫_0^1 L(t) dt`, evaluated as `(2∫x q − μ)/μ` by Fubini.
    pub fn gini(&self) -> Result<f64> {
        if let Kind::PowerLaw { beta, floor, .. } = self.kind {
            if floor == 0.0 {
                return Ok(beta / (beta + 2.0));
            }
        }
        let mean = self.mean()?;
        if !(mean > 0.0) {
            return Err(Error::UndefinedGini { mean });
        }
        let first = self.moment(0.0, 1.0, 1, Power::Direct)?;
        Ok((2.0 * first - mean) / mean)
    }

    /// Pointwise `λ·q`.
    pub fn scale(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!(
                "scale factor must be positive, got {lambda}"
            )));
        }
        let kind = match &self.kind {
            Kind::PowerLaw { beta, scale, floor } => Kind::PowerLaw {
                beta: *beta,
                scale: scale * lambda,
                floor: floor * lambda,
            },
            Kind::Piecewise { values } => Kind::Piecewise {
                values: values.iter().map(|v| v * lambda).collect(),
            },
            Kind::Tabulated { knots } => Kind::Tabulated {
                knots: knots.iter().map(|&(x, q)| (x, q * lambda)).collect(),
            },
            Kind::Transformed { base, pieces } => Kind::Transformed {
                base: base.clone(),
                pieces: pieces
                    .iter()
                    .map(|p| IncomePiece {
                        end: p.end,
                        linear: p.linear * lambda,
                        shift: p.shift * lambda,
                        inverse: p.inverse * lambda,
                    })
                    .collect(),
            },
        };
        Ok(Self { kind })
    }

    /// Cell values when the distribution is piecewise constant.
    pub fn piecewise_values(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Piecewise { values } => Some(values),
            _ => None,
        }
    }

    /// `(beta, scale, floor)` when the distribution is a power law.
    pub fn power_law_params(&self) -> Option<(f64, f64, f64)> {
        match self.kind {
            Kind::PowerLaw { beta, scale, floor } => Some((beta, scale, floor)),
            _ => None,
        }
    }
}

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    let i = knots.partition_point(|k| k.0 < x);
    if i == 0 {
        return knots[0].1;
    }
    if i >= knots.len() {
        return knots[knots.len() - 1].1;
    }
    let (x0, q0) = knots[i - 1];
    let (x1, q1) = knots[i];
    q0 + (q1 - q0) * (x - x0) / (x1 - x0)
}

/// Lorenz curve `L(t) = Q(t)/μ` of an income distribution.
#[derive(Debug, Clone)]
pub struct LorenzCurve {
    income: QuantileFunction,
    mean: f64,
}

impl LorenzCurve {
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t >= 1.0 {
            return Ok(1.0);
        }
        Ok(self.income.cumulative(t)? / self.mean)
    }
}

/// Gini coefficient of `n` equal-mass incomes, consistent with
/// [`QuantileFunction::gini`] on the matching step distribution.
pub fn gini_discrete(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("Gini of an empty list"));
    }
    if let Some(&v) = values.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(invalid(format!("incomes must be positive, got {v}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let total: f64 = sorted.iter().sum();
    let ranked: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 + 1.0) * v)
        .sum();
    Ok(2.0 * ranked / (n * total) - (n + 1.0) / n)
}

/// Gini coefficient of a discrete distribution with unequal masses, given
/// as `(income, mass)` pairs in any order. Incomes may be zero.
pub fn gini_weighted(cells: &[(f64, f64)]) -> Result<f64> {
    let mut cells: Vec<(f64, f64)> = cells.iter().copied().filter(|c| c.1 > 0.0).collect();
    if cells.is_empty() {
        return Err(invalid("Gini of an empty distribution"));
    }
    if cells.iter().any(|c| c.0 < 0.0 || !c.0.is_finite()) {
        return Err(invalid("incomes must be finite and nonnegative"));
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mass: f64 = cells.iter().map(|c| c.1).sum();
    let total: f64 = cells.iter().map(|c| c.0 * c.1).sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedGini { mean: total / mass });
    }
    let mut below = 0.0;
    let mut area = 0.0;
    for (v, m) in cells {
        let share = v * m / total;
        area += m / mass * (2.0 * below + share);
        below += share;
    }
    Ok(1.0 - area)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pairwise mean absolute difference over equal-mass cells.
    fn pairwise_gini(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let mu = values.iter().sum::<f64>() / n;
        let mut acc = 0.0;
        for a in values {
            for b in values {
                acc += (a - b).abs();
            }
        }
        acc / (2.0 * n * n * mu)
    }

    #[test]
    fn means() {
        assert_eq!(
            QuantileFunction::power_law(1.0, 2.0)
                .unwrap()
                .mean()
                .unwrap(),
            1.0
        );
        assert_eq!(
            QuantileFunction::constant(3.5).unwrap().mean().unwrap(),
            3.5
        );
        let pc = QuantileFunction::piecewise(vec![1.0, 3.0]).unwrap();
        assert!((pc.mean().unwrap() - 2.0).abs() < 1e-15);
        let floored = QuantileFunction::power_law_with_floor(2.0, 3.0, 0.5).unwrap();
        assert!((floored.mean().unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn gini_examples() {
        let two_x = QuantileFunction::power_law(1.0, 2.0).unwrap();
        assert!((two_x.gini().unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            QuantileFunction::constant(4.0).unwrap().gini().unwrap(),
            0.0
        );
        let pc = QuantileFunction::piecewise(vec![1.0, 3.0]).unwrap();
        assert!((pc.gini().unwrap() - pairwise_gini(&[1.0, 3.0])).abs() < 1e-15);
        assert!((pc.gini().unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gini_discrete_matches_pairwise_oracle() {
        assert_eq!(gini_discrete(&[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert!((gini_discrete(&[1.0, 3.0]).unwrap() - 0.25).abs() < 1e-15);
        let v = [0.5, 1.5, 2.0];
        let oracle = pairwise_gini(&v);
        assert!((gini_discrete(&v).unwrap() - oracle).abs() < 1e-15);
        let pc = QuantileFunction::piecewise(v.to_vec()).unwrap();
        assert!((pc.gini().unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn gini_discrete_errors() {
        assert!(gini_discrete(&[]).is_err());
        assert!(gini_discrete(&[1.0, 0.0]).is_err());
        assert!(gini_discrete(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn weighted_gini_agrees_with_equal_masses() {
        let v = [0.5, 1.5, 2.0, 7.0];
        let cells: Vec<_> = v.iter().map(|&x| (x, 0.25)).collect();
        assert!((gini_weighted(&cells).unwrap() - gini_discrete(&v).unwrap()).abs() < 1e-15);
        // Doubling a cell's mass is the same as duplicating it.
        let w = gini_weighted(&[(1.0, 2.0), (3.0, 1.0)]).unwrap();
        assert!((w - gini_discrete(&[1.0, 1.0, 3.0]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn scaling() {
        let q = QuantileFunction::power_law(1.0, 2.0)
            .unwrap()
            .scale(3.0)
            .unwrap();
        assert_eq!(q.eval(0.5), 3.0);
        assert!((q.gini().unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let c = QuantileFunction::constant(2.0).unwrap().scale(1.5).unwrap();
        assert_eq!(c.eval(0.3), 3.0);
        assert_eq!(c.gini().unwrap(), 0.0);
        let pc = QuantileFunction::piecewise(vec![1.0, 3.0])
            .unwrap()
            .scale(2.0)
            .unwrap();
        assert_eq!(pc.piecewise_values().unwrap(), &[2.0, 6.0]);
        assert!((pc.gini().unwrap() - 0.25).abs() < 1e-15);
        assert!(pc.scale(0.0).is_err());
        assert!(pc.scale(-1.0).is_err());
    }

    #[test]
    fn piecewise_cells_are_half_open_on_the_left() {
        let pc = QuantileFunction::piecewise(vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(pc.eval(0.0), 1.0);
        assert_eq!(pc.eval(1.0 / 3.0), 1.0);
        assert_eq!(pc.eval_right(1.0 / 3.0), 2.0);
        assert_eq!(pc.eval(0.5), 2.0);
        assert_eq!(pc.eval(1.0), 4.0);
    }

    #[test]
    fn tabulated_interpolates_and_integrates() {
        let t = QuantileFunction::tabulated(vec![(0.0, 1.0), (0.5, 1.0), (1.0, 3.0)]).unwrap();
        assert_eq!(t.eval(0.75), 2.0);
        assert!((t.mean().unwrap() - 1.5).abs() < 1e-15);
        let inv = t.moment(0.5, 1.0, 0, Power::Inverse).unwrap();
        // ∫_{1/2}^1 dx / (1 + 4(x − 1/2)) = ln(3)/4
        assert!((inv - 3f64.ln() / 4.0).abs() < 1e-10);
        assert!(QuantileFunction::tabulated(vec![(0.0, 2.0), (1.0, 1.0)]).is_err());
        assert!(QuantileFunction::tabulated(vec![(0.1, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn inverse_moments_of_power_laws() {
        let q = QuantileFunction::power_law(1.0, 2.0).unwrap();
        let v = q.moment(0.5, 1.0, 0, Power::Inverse).unwrap();
        assert!((v - 2f64.ln() / 2.0).abs() < 1e-15);
        assert!(q.moment(0.0, 1.0, 0, Power::Inverse).is_err());
        let floored = QuantileFunction::power_law_with_floor(0.5, 1.0, 1.0).unwrap();
        let quad = floored.moment(0.0, 1.0, 1, Power::Inverse).unwrap();
        // u = √x turns it into 2∫ u³/(1+u) du = 2(5/6 − ln 2)
        let exact = 2.0 * (5.0 / 6.0 - 2f64.ln());
        assert!((quad - exact).abs() < 1e-9, "{quad} vs {exact}");
    }

    #[test]
    fn lorenz_endpoints() {
        let l = QuantileFunction::power_law(2.0, 3.0)
            .unwrap()
            .lorenz()
            .unwrap();
        assert_eq!(l.eval(0.0).unwrap(), 0.0);
        assert_eq!(l.eval(1.0).unwrap(), 1.0);
        assert!((l.eval(0.5).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn json_schema() {
        let q: QuantileFunction =
            serde_json::from_str(r#"{"kind":"power_law","beta":1.0,"scale":2.0}"#).unwrap();
        assert_eq!(q, QuantileFunction::power_law(1.0, 2.0).unwrap());
        let p: QuantileFunction =
            serde_json::from_str(r#"{"kind":"piecewise","values":[1,3]}"#).unwrap();
        assert_eq!(p.mean().unwrap(), 2.0);
        let t: QuantileFunction =
            serde_json::from_str(r#"{"kind":"tabulated","knots":[[0,1],[1,2]]}"#).unwrap();
        assert_eq!(t.eval(0.5), 1.5);
        assert!(
            serde_json::from_str::<QuantileFunction>(r#"{"kind":"piecewise","values":[3,1]}"#)
                .is_err()
        );
        let back = serde_json::to_string(&q).unwrap();
        assert_eq!(back, r#"{"kind":"power_law","beta":1.0,"scale":2.0}"#);
    }
}
