//! Pigou's network: a constant-latency link `ℓ_u = 1` next to a congestible
//! link `ℓ_d(z) = z`, with income `q(x) = (β+1)·x^β` (or the unscaled `x^β`).
//!
//! Tolling the fast link with `τ = q(c)·c` makes the poorest `c` of the
//! population switch to the slow link. The closed forms here serve as oracles
//! for the generic equilibrium pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::game::{equilibrium_parallel, CostModel, EquilibriumResult, ParallelNetwork};
use crate::income::QuantileFunction;
use crate::numeric::{golden_max, minimize_smooth};

/// Toll on the fast link that makes the poorest `c` of agents indifferent.
pub fn toll_for_switchpoint(q: &QuantileFunction, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(invalid(format!("switch point must lie in [0, 1], got {c}")));
    }
    Ok(if c == 0.0 { 0.0 } else { q.eval(c) * c })
}

/// Optimal toll `2^{−(β+1)}` for the unscaled income `x^β`.
pub fn optimal_toll_unscaled(beta: f64) -> f64 {
    (-(beta + 1.0)).exp2()
}

/// Optimal toll `(β+1)·2^{−(β+1)}` for the unit-mean income `(β+1)·x^β`.
pub fn optimal_toll_scaled(beta: f64) -> f64 {
    (beta + 1.0) * optimal_toll_unscaled(beta)
}

/// Equilibrium of the Pigou network tolled so that the switch point is `c`.
pub fn solve_at_switchpoint(
    q: &QuantileFunction,
    c: f64,
    model: CostModel,
) -> Result<EquilibriumResult> {
    let net = ParallelNetwork::pigou(0.0, toll_for_switchpoint(q, c)?)?;
    equilibrium_parallel(&net, q, model)
}

/// Quantities plotted against the switch point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    /// Canonical social cost `∫ cost(x) dx`.
    Social,
    /// Time spent travelling, `Σ_e c_e ℓ_e(c_e)`.
    Latency,
    /// Social cost under the time-unit model, `∫ (ℓ + τ/q) dx`.
    Cf1,
}

impl std::str::FromStr for Curve {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "social" => Ok(Curve::Social),
            "latency" => Ok(Curve::Latency),
            "cf1" => Ok(Curve::Cf1),
            other => Err(invalid(format!("unknown curve '{other}'"))),
        }
    }
}

impl Curve {
    /// Closed form for `q(x) = 2x`.
    pub fn closed_form(self, c: f64) -> f64 {
        match self {
            Curve::Social => social_cost_curve(c),
            Curve::Latency => actual_latency_curve(c),
            Curve::Cf1 => perceived_latency_cf1_curve(c),
        }
    }

    /// Value computed by solving the tolled equilibrium for income `q`.
    pub fn numeric(self, q: &QuantileFunction, c: f64) -> Result<f64> {
        match self {
            Curve::Social => solve_at_switchpoint(q, c, CostModel::Canonical)?.social_cost(),
            Curve::Latency => {
                Ok(solve_at_switchpoint(q, c, CostModel::Canonical)?.actual_latency_total())
            }
            Curve::Cf1 => solve_at_switchpoint(q, c, CostModel::Cf1)?.social_cost(),
        }
    }
}

/// `1 − c + 2c² − c³`.
pub fn social_cost_curve(c: f64) -> f64 {
    1.0 - c + 2.0 * c * c - c * c * c
}

/// `c + (1 − c)²`.
pub fn actual_latency_curve(c: f64) -> f64 {
    c + (1.0 - c) * (1.0 - c)
}

/// `1 − c + c² − c²·ln c`, extended by continuity to 1 at `c = 0`.
pub fn perceived_latency_cf1_curve(c: f64) -> f64 {
    if c == 0.0 {
        1.0
    } else {
        1.0 - c + c * c - c * c * c.ln()
    }
}

/// Minimizer of a curve over switch points, computed through the equilibrium
/// pipeline. Returns `(c, τ, value)`.
pub fn locate_minimum(q: &QuantileFunction, curve: Curve) -> Result<(f64, f64, f64)> {
    let c = minimize_smooth(|c| curve.numeric(q, c), 0.0, 1.0, 64)?;
    Ok((c, toll_for_switchpoint(q, c)?, curve.numeric(q, c)?))
}

/// Iniquity at the optimal toll, `β(β+1) / ((β+2)·2^{β+3})`.
pub fn iniquity_closed_form(beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(invalid(format!(
            "beta must be finite and nonnegative, got {beta}"
        )));
    }
    Ok(beta * (beta + 1.0) / ((beta + 2.0) * (beta + 3.0).exp2()))
}

/// The `β` maximizing the closed-form iniquity, by golden section on `[0, 10]`.
pub fn iniquity_argmax() -> f64 {
    golden_max(
        |b| iniquity_closed_form(b).unwrap_or(f64::NEG_INFINITY),
        0.0,
        10.0,
        1e-6,
    )
}

/// Ingredients of `G(α) = 1 − 2(A − αB)/(μ − αC)` for income `(β+1)x^β` at the
/// optimal toll under the canonical model, in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PigouMoments {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mu: f64,
}

impl PigouMoments {
    pub fn new(beta: f64) -> Result<Self> {
        iniquity_closed_form(beta)?;
        let s = optimal_toll_unscaled(beta);
        let tau = optimal_toll_scaled(beta);
        let a = 1.0 / (beta + 2.0);
        let c = 0.5 + 0.5 * s * (beta + 2.0);
        let poor_half = s * (beta + 3.0) / (2.0 * (beta + 2.0));
        let b = poor_half + 0.5 * (a - poor_half) + tau / 8.0;
        Ok(Self { a, b, c, mu: 1.0 })
    }

    /// Largest admissible `α` (ex-post incomes stay nonnegative).
    pub fn alpha_limit(beta: f64) -> f64 {
        1f64.min(beta.exp2() / (beta + 1.0))
    }
}

/// Exact post-game Gini `G(α)` at the optimal toll for income `(β+1)x^β`.
pub fn gini_expansion_exact(beta: f64, alpha: f64) -> Result<f64> {
    let m = PigouMoments::new(beta)?;
    if !(alpha >= 0.0) || alpha >= PigouMoments::alpha_limit(beta) {
        return Err(invalid(format!(
            "alpha = {alpha} leaves the admissible range"
        )));
    }
    Ok(1.0 - 2.0 * (m.a - alpha * m.b) / (m.mu - alpha * m.c))
}

/// Two-term expansion `β/(β+2) + I(β)·α`.
pub fn gini_expansion_linear(beta: f64, alpha: f64) -> Result<f64> {
    Ok(beta / (beta + 2.0) + iniquity_closed_form(beta)? * alpha)
}
