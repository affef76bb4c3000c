//! The iniquity index: the rate at which an equilibrium's costs raise the Gini
//! coefficient of incomes, `I = d/dα G(q − α·cost) at α = 0`.
//!
//! With `A = ∫₀¹ (1−x) q(x) dx`, `B = ∫₀¹ (1−t) cost(t) dt`, `C = ∫₀¹ cost` and
//! mean income `μ`, an order-preserving ex-post income has
//! `G(α) = 1 − 2(A − αB)/(μ − αC)`, hence `I = 2(Bμ − AC)/μ²`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::{equilibrium_parallel, ex_post, CostModel, EquilibriumResult, ParallelNetwork};
use crate::income::{Power, QuantileFunction};

/// The integrals behind the post-game Gini.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiniComponents {
    /// `∫₀¹ (1−x) q(x) dx`, the integral of the cumulative income.
    pub a: f64,
    /// `∫₀¹ (1−t) cost(t) dt`.
    pub b: f64,
    /// Social cost `∫₀¹ cost(t) dt`.
    pub c: f64,
    /// Mean income.
    pub mu: f64,
}

impl GiniComponents {
    pub fn new(q: &QuantileFunction, result: &EquilibriumResult) -> Result<Self> {
        let mu = q.mean()?;
        let a = mu - q.moment(0.0, 1.0, 1, Power::Direct)?;
        let c = result.cost_moment(0)?;
        let b = c - result.cost_moment(1)?;
        Ok(Self { a, b, c, mu })
    }

    /// `G(α)` assuming ex-post incomes stay ordered.
    pub fn gini_at(&self, alpha: f64) -> f64 {
        1.0 - 2.0 * (self.a - alpha * self.b) / (self.mu - alpha * self.c)
    }

    pub fn iniquity(&self) -> Result<f64> {
        if !(self.mu > 0.0) {
            return Err(Error::UndefinedGini { mean: self.mu });
        }
        Ok(2.0 * (self.b * self.mu - self.a * self.c) / (self.mu * self.mu))
    }
}

/// Iniquity of an equilibrium from its closed-form derivative.
pub fn iniquity_analytic(q: &QuantileFunction, result: &EquilibriumResult) -> Result<f64> {
    GiniComponents::new(q, result)?.iniquity()
}

/// `1e-2` halved eight times.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..9).map(|i| 1e-2 / f64::from(1u32 << i)).collect()
}

/// Difference quotients `(G(q_α) − G(q))/α` and their Richardson table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifference {
    pub alphas: Vec<f64>,
    pub gini_ex_post: Vec<f64>,
    pub quotients: Vec<f64>,
    /// `table[i][j]`: order-`j` extrapolation ending at `alphas[i]`.
    pub table: Vec<Vec<f64>>,
    /// Highest-order entry of the last row.
    pub estimate: f64,
}

/// Richardson order used for the reported limit.
pub const RICHARDSON_ORDER: usize = 2;

/// Iniquity as the limit of one-sided difference quotients of the Gini of the
/// actual ex-post income. Consecutive grid points must halve.
pub fn iniquity_finite_difference(
    q: &QuantileFunction,
    result: &EquilibriumResult,
    alphas: &[f64],
) -> Result<FiniteDifference> {
    if alphas.is_empty() {
        return Err(invalid("the alpha grid is empty"));
    }
    for w in alphas.windows(2) {
        if (w[1] * 2.0 - w[0]).abs() > 1e-12 * w[0] {
            return Err(invalid("the alpha grid must halve at every step"));
        }
    }
    let g0 = q.gini()?;
    let mut gini_ex_post = Vec::with_capacity(alphas.len());
    let mut quotients = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        let post = ex_post(q, result, alpha, result.model())?;
        let g = post.gini()?;
        gini_ex_post.push(g);
        quotients.push((g - g0) / alpha);
    }
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(alphas.len());
    for (i, &d) in quotients.iter().enumerate() {
        let mut row = vec![d];
        for j in 1..=RICHARDSON_ORDER.min(i) {
            let factor = f64::from((1u32 << j) - 1);
            let prev = row[j - 1];
            row.push(prev + (prev - table[i - 1][j - 1]) / factor);
        }
        table.push(row);
    }
    let estimate = *table
        .last()
        .and_then(|r| r.last())
        .expect("non-empty table");
    Ok(FiniteDifference {
        alphas: alphas.to_vec(),
        gini_ex_post,
        quotients,
        table,
        estimate,
    })
}

/// Everything known about one instance's iniquity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IniquityReport {
    pub model: CostModel,
    pub gini_ex_ante: f64,
    pub alphas: Vec<f64>,
    pub gini_ex_post: Vec<f64>,
    pub analytic: f64,
    pub finite_difference: f64,
    pub gap: f64,
    pub components: GiniComponents,
}

/// One CSV row per `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IniquityRow {
    pub alpha: f64,
    pub gini_ex_post: f64,
    pub gini_predicted: f64,
    pub quotient: f64,
}

impl IniquityReport {
    pub fn new(q: &QuantileFunction, result: &EquilibriumResult, alphas: &[f64]) -> Result<Self> {
        let components = GiniComponents::new(q, result)?;
        let analytic = components.iniquity()?;
        let fd = iniquity_finite_difference(q, result, alphas)?;
        Ok(Self {
            model: result.model(),
            gini_ex_ante: q.gini()?,
            alphas: fd.alphas,
            gini_ex_post: fd.gini_ex_post,
            analytic,
            finite_difference: fd.estimate,
            gap: (analytic - fd.estimate).abs(),
            components,
        })
    }

    pub fn rows(&self) -> Vec<IniquityRow> {
        self.alphas
            .iter()
            .zip(&self.gini_ex_post)
            .map(|(&alpha, &g)| IniquityRow {
                alpha,
                gini_ex_post: g,
                gini_predicted: self.components.gini_at(alpha),
                quotient: (g - self.gini_ex_ante) / alpha,
            })
            .collect()
    }
}

/// Solve a network and return the analytic iniquity of its equilibrium.
pub fn iniquity_of(net: &ParallelNetwork, q: &QuantileFunction, model: CostModel) -> Result<f64> {
    iniquity_analytic(q, &equilibrium_parallel(net, q, model)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEntry {
    pub lambda: f64,
    pub iniquity: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleInvarianceReport {
    pub iniquity: f64,
    pub entries: Vec<ScaleEntry>,
    pub max_gap: f64,
}

impl ScaleInvarianceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_gap <= tol
    }
}

/// Recompute the iniquity with incomes and tolls both multiplied by each `λ`
/// (canonical costs).
pub fn check_scale_invariance(
    q: &QuantileFunction,
    net: &ParallelNetwork,
    lambdas: &[f64],
) -> Result<ScaleInvarianceReport> {
    let base = iniquity_of(net, q, CostModel::Canonical)?;
    let mut entries = Vec::with_capacity(lambdas.len());
    let mut max_gap: f64 = 0.0;
    for &lambda in lambdas {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!(
                "scale factor must be positive, got {lambda}"
            )));
        }
        let scaled = iniquity_of(
            &net.scale_tolls(lambda)?,
            &q.scale(lambda)?,
            CostModel::Canonical,
        )?;
        let gap = (scaled - base).abs();
        max_gap = max_gap.max(gap);
        entries.push(ScaleEntry {
            lambda,
            iniquity: scaled,
            gap,
        });
    }
    Ok(ScaleInvarianceReport {
        iniquity: base,
        entries,
        max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{LatencyFunction, Link};
    use crate::income::gini_discrete;
    use crate::pigou::{optimal_toll_scaled, solve_at_switchpoint};

    fn pigou_result(beta: f64) -> (QuantileFunction, EquilibriumResult) {
        let q = QuantileFunction::unit_mean_power_law(beta).unwrap();
        let r = solve_at_switchpoint(&q, 0.5, CostModel::Canonical).unwrap();
        (q, r)
    }

    #[test]
    fn pigou_beta_one_components() {
        let (q, r) = pigou_result(1.0);
        let m = GiniComponents::new(&q, &r).unwrap();
        assert!((m.a - 1.0 / 3.0).abs() < 1e-14);
        assert!((m.b - 5.0 / 16.0).abs() < 1e-14);
        assert!((m.c - 7.0 / 8.0).abs() < 1e-14);
        assert!((m.mu - 1.0).abs() < 1e-14);
        assert!((m.iniquity().unwrap() - 1.0 / 24.0).abs() < 1e-13);
    }

    #[test]
    fn pigou_beta_two_and_three() {
        assert!(
            (iniquity_analytic(&pigou_result(2.0).0, &pigou_result(2.0).1).unwrap() - 3.0 / 64.0)
                .abs()
                < 1e-12
        );
        let (q, r) = pigou_result(3.0);
        assert!((iniquity_analytic(&q, &r).unwrap() - 3.0 / 80.0).abs() < 1e-12);
        assert!((r.tolls[1] - optimal_toll_scaled(3.0)).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_agrees() {
        let (q, r) = pigou_result(1.0);
        let fd = iniquity_finite_difference(&q, &r, &default_alpha_grid()).unwrap();
        assert!((fd.estimate - 1.0 / 24.0).abs() < 1e-6, "{}", fd.estimate);
        assert_eq!(fd.table.len(), 9);
        assert_eq!(fd.table[8].len(), 3);
    }

    #[test]
    fn zero_cost_instance_has_zero_iniquity() {
        let zero = LatencyFunction::constant(0.0).unwrap();
        let net =
            ParallelNetwork::new(vec![Link::new(zero.clone(), 0.0), Link::new(zero, 0.0)]).unwrap();
        let q = QuantileFunction::unit_mean_power_law(1.0).unwrap();
        let r = equilibrium_parallel(&net, &q, CostModel::Canonical).unwrap();
        assert_eq!(iniquity_analytic(&q, &r).unwrap(), 0.0);
        let fd = iniquity_finite_difference(&q, &r, &default_alpha_grid()).unwrap();
        assert!(fd.estimate.abs() < 1e-9);
    }

    #[test]
    fn constant_income_toll_free_is_zero() {
        let lin = LatencyFunction::linear(1.0, 0.0).unwrap();
        let net =
            ParallelNetwork::new(vec![Link::new(lin.clone(), 0.0), Link::new(lin, 0.0)]).unwrap();
        let q = QuantileFunction::constant(2.0).unwrap();
        assert!(iniquity_of(&net, &q, CostModel::Canonical).unwrap().abs() < 1e-15);
    }

    #[test]
    fn report_rows_track_prediction() {
        let (q, r) = pigou_result(2.0);
        let report = IniquityReport::new(&q, &r, &default_alpha_grid()).unwrap();
        assert!(report.gap < 1e-6);
        for row in report.rows() {
            assert!((row.gini_ex_post - row.gini_predicted).abs() < 1e-12);
        }
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"analytic\""));
    }

    #[test]
    fn bad_alpha_grids() {
        let (q, r) = pigou_result(1.0);
        assert!(iniquity_finite_difference(&q, &r, &[]).is_err());
        assert!(iniquity_finite_difference(&q, &r, &[0.1, 0.03]).is_err());
        assert!(matches!(
            iniquity_finite_difference(&q, &r, &[2.0]),
            Err(Error::AlphaTooLarge { .. })
        ));
    }

    #[test]
    fn scale_invariance_on_pigou() {
        let (q, _) = pigou_result(1.0);
        let net = ParallelNetwork::pigou(0.0, optimal_toll_scaled(1.0)).unwrap();
        let report = check_scale_invariance(&q, &net, &[0.5, 1.0, 2.0, 10.0]).unwrap();
        assert!((report.iniquity - 1.0 / 24.0).abs() < 1e-12);
        assert!(report.passes(1e-8));
        assert_eq!(report.entries[1].gap, 0.0);
    }

    #[test]
    fn single_crossing_raises_gini() {
        // Equal means; `b` is below `a` among the poor and above among the rich.
        let a = [2.0, 3.0, 4.0, 5.0];
        let b = [1.0, 2.5, 4.5, 6.0];
        assert!(gini_discrete(&b).unwrap() >= gini_discrete(&a).unwrap());
    }

    #[test]
    fn nondecreasing_shrink_factor_raises_gini() {
        let q = [1.0, 2.0, 3.0, 7.0, 11.0];
        let beta = [0.2, 0.5, 0.5, 0.9, 1.0];
        let shrunk: Vec<f64> = q.iter().zip(beta).map(|(x, b)| x * b).collect();
        assert!(gini_discrete(&shrunk).unwrap() >= gini_discrete(&q).unwrap());
    }
}
