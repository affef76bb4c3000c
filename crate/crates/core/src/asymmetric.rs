//! Two-commodity instances where tolls make society as a whole more equal
//! even though inequality grows inside each commodity.
//!
//! Incomes are `q(x) = x`. Each commodity is an interval of types routed on
//! its own source-sink pair; after the game, incomes are piecewise linear in
//! `x` but need not be monotone across commodities, so Ginis are computed
//! exactly on mixtures of uniform distributions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::{equilibrium_parallel, CostModel, LatencyFunction, Link, ParallelNetwork};
use crate::income::QuantileFunction;

/// Default weight of the game in ex-post incomes.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Types `x ∈ [start, end]` with income `q(x) = x` paying `x·latency + toll`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPiece {
    pub start: f64,
    pub end: f64,
    pub latency: f64,
    pub toll: f64,
}

impl CostPiece {
    fn ex_post(&self, alpha: f64, x: f64) -> f64 {
        x - alpha * (x * self.latency + self.toll)
    }

    /// Largest `α` keeping the piece's incomes nonnegative.
    fn alpha_limit(&self) -> f64 {
        let x = self.start;
        let spend = x * self.latency + self.toll;
        if spend > 0.0 {
            x / spend
        } else {
            f64::INFINITY
        }
    }
}

/// A mixture of uniform income distributions, `(low, high, mass)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UniformMixture {
    pub components: Vec<(f64, f64, f64)>,
}

/// Widths below this are treated as point masses.
const POINT_WIDTH: f64 = 1e-9;

fn cube6(t: f64) -> f64 {
    t.abs().powi(3) / 6.0
}

fn half_sq(t: f64) -> f64 {
    0.5 * t * t.abs()
}

/// `E|U − V|` for independent uniforms on `[a, b]` and `[c, d]`.
fn mean_abs_difference(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (w1, w2) = (b - a, d - c);
    match (w1 < POINT_WIDTH, w2 < POINT_WIDTH) {
        (true, true) => (0.5 * (a + b) - 0.5 * (c + d)).abs(),
        (true, false) => {
            let x = 0.5 * (a + b);
            (half_sq(x - c) - half_sq(x - d)) / w2
        }
        (false, true) => mean_abs_difference(c, d, a, b),
        (false, false) => (cube6(b - c) + cube6(a - d) - cube6(b - d) - cube6(a - c)) / (w1 * w2),
    }
}

impl UniformMixture {
    pub fn push(&mut self, low: f64, high: f64, mass: f64) {
        let (low, high) = if low <= high {
            (low, high)
        } else {
            (high, low)
        };
        if mass > 0.0 {
            self.components.push((low, high, mass));
        }
    }

    pub fn mass(&self) -> f64 {
        self.components.iter().map(|c| c.2).sum()
    }

    pub fn mean(&self) -> f64 {
        self.components
            .iter()
            .map(|c| 0.5 * (c.0 + c.1) * c.2)
            .sum::<f64>()
            / self.mass()
    }

    /// `E|X − Y| / (2μ)` of the renormalized mixture.
    pub fn gini(&self) -> Result<f64> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(invalid("Gini of an empty mixture"));
        }
        if self.components.iter().any(|c| c.0 < 0.0) {
            return Err(invalid("incomes must be nonnegative"));
        }
        let mu = self.mean();
        if !(mu > 0.0) {
            return Err(Error::UndefinedGini { mean: mu });
        }
        let mut acc = 0.0;
        for &(a, b, mi) in &self.components {
            for &(c, d, mj) in &self.components {
                acc += mi * mj * mean_abs_difference(a, b, c, d);
            }
        }
        Ok(acc / (m * m) / (2.0 * mu))
    }
}

/// Mixture of `x ↦ x − α·cost(x)` over the given pieces restricted to `[lo, hi]`.
fn ex_post_mixture(pieces: &[CostPiece], alpha: f64, lo: f64, hi: f64) -> UniformMixture {
    let mut mix = UniformMixture::default();
    for p in pieces {
        let (a, b) = (p.start.max(lo), p.end.min(hi));
        if b > a {
            mix.push(p.ex_post(alpha, a), p.ex_post(alpha, b), b - a);
        }
    }
    mix
}

fn check_alpha(pieces: &[CostPiece], alpha: f64) -> Result<f64> {
    let limit = pieces
        .iter()
        .map(CostPiece::alpha_limit)
        .fold(f64::INFINITY, f64::min);
    if !(alpha >= 0.0) || alpha > limit {
        let worst = pieces
            .iter()
            .min_by(|a, b| a.alpha_limit().total_cmp(&b.alpha_limit()))
            .expect("nonempty pieces");
        return Err(Error::AlphaTooLarge {
            alpha,
            quantile: worst.start,
            income: worst.ex_post(alpha, worst.start),
        });
    }
    Ok(limit)
}

/// Solve the upper commodity `[x0, 1]` as a parallel network over its own
/// normalized population and map the result back to absolute types.
fn solve_commodity(x0: f64, links: Vec<Link>) -> Result<(Vec<CostPiece>, f64, Vec<f64>)> {
    let width = 1.0 - x0;
    let q = QuantileFunction::power_law_with_floor(1.0, width, x0)?;
    let net = ParallelNetwork::new(links)?;
    let eq = equilibrium_parallel(&net, &q, CostModel::Canonical)?;
    let pieces = eq
        .segments()
        .map(|s| CostPiece {
            start: x0 + width * s.start,
            end: x0 + width * s.end,
            latency: s.latency,
            toll: s.toll,
        })
        .collect();
    let masses = eq.congestion.iter().map(|c| c * width).collect();
    Ok((pieces, eq.residual, masses))
}

/// Measurements on the first two-commodity instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig7Report {
    pub alpha: f64,
    /// Mass of the richest types on the tolled link.
    pub tolled_mass: f64,
    /// `(1 − m)² − 3/4`.
    pub quadratic_residual: f64,
    pub boundary_residual: f64,
    /// Largest `α` keeping ex-post incomes nonnegative.
    pub alpha_limit: f64,
    pub gini_ex_ante: f64,
    pub gini_q0: f64,
    pub gini_qhat: f64,
    pub gini_ex_ante_d2: f64,
    pub gini_q0_d2: f64,
    pub gini_qhat_d2: f64,
}

/// Toll on the congestible link of the second commodity.
pub const FIG7_TOLL: f64 = 0.75;

/// Types `[0, ½]` travel on a free zero-latency link; types `[½, 1]` choose
/// between `ℓ_u = 1` and `ℓ_d(z) = z` tolled at `3/4`. The zero-toll baseline
/// `q₀` routes the second commodity on `ℓ_d` alone.
pub fn solve_fig7(alpha: f64) -> Result<Fig7Report> {
    let half = 0.5;
    let tolled = |toll: f64| -> Result<Vec<Link>> {
        Ok(vec![
            Link::new(LatencyFunction::constant(1.0)?, 0.0),
            // Congestion is measured in absolute mass, the commodity has mass ½.
            Link::new(LatencyFunction::linear(half, 0.0)?, toll),
        ])
    };
    let free = CostPiece {
        start: 0.0,
        end: half,
        latency: 0.0,
        toll: 0.0,
    };
    let (upper, residual, masses) = solve_commodity(half, tolled(FIG7_TOLL)?)?;
    let (upper0, _, _) = solve_commodity(half, tolled(0.0)?)?;
    let mut hat = vec![free];
    hat.extend(upper);
    let mut zero = vec![free];
    zero.extend(upper0);
    let alpha_limit = check_alpha(&hat, alpha)?.min(check_alpha(&zero, alpha)?);
    let ante = [CostPiece {
        start: 0.0,
        end: 1.0,
        latency: 0.0,
        toll: 0.0,
    }];
    let m = masses[1];
    Ok(Fig7Report {
        alpha,
        tolled_mass: m,
        quadratic_residual: (1.0 - m) * (1.0 - m) - 0.75,
        boundary_residual: residual,
        alpha_limit,
        gini_ex_ante: ex_post_mixture(&ante, alpha, 0.0, 1.0).gini()?,
        gini_q0: ex_post_mixture(&zero, alpha, 0.0, 1.0).gini()?,
        gini_qhat: ex_post_mixture(&hat, alpha, 0.0, 1.0).gini()?,
        gini_ex_ante_d2: ex_post_mixture(&ante, alpha, half, 1.0).gini()?,
        gini_q0_d2: ex_post_mixture(&zero, alpha, half, 1.0).gini()?,
        gini_qhat_d2: ex_post_mixture(&hat, alpha, half, 1.0).gini()?,
    })
}

/// One point of the second instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamma2Point {
    pub x_star: f64,
    pub h_star: f64,
    /// Mass of the second commodity on the upper path.
    pub f: f64,
    pub tau: f64,
    /// Upper-path mass found by the equilibrium solver.
    pub solved_upper_mass: f64,
    /// `cost_u(h*) − cost_d(h*)`.
    pub indifference_gap: f64,
    pub gini_q0: f64,
    pub gini_qhat: f64,
    pub gini_q0_d2: f64,
    pub gini_qhat_d2: f64,
}

impl Gamma2Point {
    pub fn overall_difference(&self) -> f64 {
        self.gini_qhat - self.gini_q0
    }

    pub fn restricted_difference(&self) -> f64 {
        self.gini_qhat_d2 - self.gini_q0_d2
    }
}

/// Types `[0, x*]` cross a single link `ℓ(z) = z`; types `[x*, 1]` either take
/// the upper path `ℓ_u(z) = 1 + z` or join the shared link and pay `τ`. The
/// toll `τ = 2h*(h* − x*)` with `h* = (1+x*)/2` splits the second commodity
/// in half. The baseline `q₀` is the toll-free equilibrium, where everyone
/// shares the lower link at latency 1.
pub fn solve_gamma2(x_star: f64, alpha: f64) -> Result<Gamma2Point> {
    if !(x_star > 0.0 && x_star < 1.0) {
        return Err(invalid(format!("x* must lie in (0, 1), got {x_star}")));
    }
    let h = 0.5 * (1.0 + x_star);
    let f = h - x_star;
    let tau = 2.0 * h * f;
    let width = 1.0 - x_star;
    let links = vec![
        Link::new(LatencyFunction::linear(width, 1.0)?, 0.0),
        // The shared link also carries the whole first commodity.
        Link::new(LatencyFunction::linear(width, x_star)?, tau),
    ];
    let (upper, _, masses) = solve_commodity(x_star, links)?;
    let shared_latency = x_star + masses[1];
    let first = CostPiece {
        start: 0.0,
        end: x_star,
        latency: shared_latency,
        toll: 0.0,
    };
    let mut hat = vec![first];
    hat.extend(upper);
    let zero = [CostPiece {
        start: 0.0,
        end: 1.0,
        latency: 1.0,
        toll: 0.0,
    }];
    check_alpha(&hat, alpha)?;
    check_alpha(&zero, alpha)?;
    let indifference_gap = h * (1.0 + f) - (h * (1.0 - f) + tau);
    Ok(Gamma2Point {
        x_star,
        h_star: h,
        f,
        tau,
        solved_upper_mass: masses[0],
        indifference_gap,
        gini_q0: ex_post_mixture(&zero, alpha, 0.0, 1.0).gini()?,
        gini_qhat: ex_post_mixture(&hat, alpha, 0.0, 1.0).gini()?,
        gini_q0_d2: ex_post_mixture(&zero, alpha, x_star, 1.0).gini()?,
        gini_qhat_d2: ex_post_mixture(&hat, alpha, x_star, 1.0).gini()?,
    })
}

/// `x* ∈ {0.1, 0.15, …, 0.9}`.
pub fn default_gamma2_grid() -> Vec<f64> {
    (0..17).map(|i| 0.1 + 0.05 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamma2Sweep {
    pub alpha: f64,
    pub points: Vec<Gamma2Point>,
    /// Points where the overall Gini falls below the baseline.
    pub overall_improvements: usize,
    /// Whether the within-commodity Gini rises at every point.
    pub restricted_worsens_everywhere: bool,
}

impl Gamma2Sweep {
    /// Overall improvement at a strict majority of points and restricted
    /// worsening at all of them.
    pub fn reproduces_claims(&self) -> bool {
        self.restricted_worsens_everywhere && 2 * self.overall_improvements > self.points.len()
    }
}

pub fn gamma2_sweep(grid: &[f64], alpha: f64) -> Result<Gamma2Sweep> {
    let points = grid
        .iter()
        .map(|&x| solve_gamma2(x, alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(Gamma2Sweep {
        alpha,
        overall_improvements: points
            .iter()
            .filter(|p| p.overall_difference() < 0.0)
            .count(),
        restricted_worsens_everywhere: points.iter().all(|p| p.restricted_difference() > 0.0),
        points,
    })
}
