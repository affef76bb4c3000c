//! Nonatomic congestion games on parallel links with income-dependent costs.
//!
//! An agent of income `q` on a link with latency `ℓ` and toll `τ` sees the edge
//! cost `f = τ/q + ℓ`. The three agent-cost models combine it as
//!
//! * [`CostModel::Cf1`]: `τ/q + ℓ` (time units),
//! * [`CostModel::Cf2`]: `q·(τ/q + ℓ)`,
//! * [`CostModel::Canonical`]: `q·ℓ + τ` (money units).
//!
//! All three induce the same best responses, so a single equilibrium flow
//! serves every model; only the cost attached to it differs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::income::{IncomePiece, Power, QuantileFunction};
use crate::numeric::monotone_root;

/// Sweep cap for the breakpoint Gauss-Seidel iteration.
pub const MAX_SWEEPS: usize = 100_000;
/// Breakpoint movement below which a sweep counts as converged.
pub const SWEEP_TOL: f64 = 1e-15;
/// Relative deviation gain tolerated when accepting a candidate equilibrium.
pub const ACCEPT_TOL: f64 = 1e-9;
/// Links carrying less than this mass are treated as unused.
const MIN_LOAD: f64 = 1e-13;
/// Breakpoints this close to an income jump are moved onto it.
const KNOT_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum LatencyKind {
    Constant(f64),
    Linear { a: f64, b: f64 },
    Polynomial(Vec<f64>),
    Piecewise(Vec<f64>),
}

/// A nonnegative, nondecreasing latency `ℓ(z)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatencySpec", into = "LatencySpec")]
pub struct LatencyFunction {
    kind: LatencyKind,
}

/// JSON schema of a [`LatencyFunction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencySpec {
    Constant { c: f64 },
    Linear { a: f64, b: f64 },
    Polynomial { coeffs: Vec<f64> },
    Piecewise { levels: Vec<f64> },
}

impl TryFrom<LatencySpec> for LatencyFunction {
    type Error = Error;

    fn try_from(spec: LatencySpec) -> Result<Self> {
        match spec {
            LatencySpec::Constant { c } => LatencyFunction::constant(c),
            LatencySpec::Linear { a, b } => LatencyFunction::linear(a, b),
            LatencySpec::Polynomial { coeffs } => LatencyFunction::polynomial(coeffs),
            LatencySpec::Piecewise { levels } => LatencyFunction::piecewise(levels),
        }
    }
}

impl From<LatencyFunction> for LatencySpec {
    fn from(l: LatencyFunction) -> Self {
        match l.kind {
            LatencyKind::Constant(c) => LatencySpec::Constant { c },
            LatencyKind::Linear { a, b } => LatencySpec::Linear { a, b },
            LatencyKind::Polynomial(coeffs) => LatencySpec::Polynomial { coeffs },
            LatencyKind::Piecewise(levels) => LatencySpec::Piecewise { levels },
        }
    }
}

fn check_nonneg(v: f64, what: &str) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "{what} must be finite and nonnegative, got {v}"
        )))
    }
}

impl LatencyFunction {
    pub fn constant(c: f64) -> Result<Self> {
        check_nonneg(c, "constant latency")?;
        Ok(Self {
            kind: LatencyKind::Constant(c),
        })
    }

    /// `ℓ(z) = a·z + b`.
    pub fn linear(a: f64, b: f64) -> Result<Self> {
        check_nonneg(a, "latency slope")?;
        check_nonneg(b, "latency intercept")?;
        Ok(Self {
            kind: LatencyKind::Linear { a, b },
        })
    }

    /// `ℓ(z) = Σ coeffs[i]·z^i` with nonnegative coefficients.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("polynomial latency needs at least one coefficient"));
        }
        for &c in &coeffs {
            check_nonneg(c, "polynomial coefficient")?;
        }
        Ok(Self {
            kind: LatencyKind::Polynomial(coeffs),
        })
    }

    /// Step latency: `levels[i]` on loads in `(i/n, (i+1)/n]`.
    pub fn piecewise(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("piecewise latency needs at least one level"));
        }
        for &l in &levels {
            check_nonneg(l, "latency level")?;
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("piecewise latency levels must be nondecreasing"));
        }
        Ok(Self {
            kind: LatencyKind::Piecewise(levels),
        })
    }

    pub fn eval(&self, z: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        match &self.kind {
            LatencyKind::Constant(c) => *c,
            LatencyKind::Linear { a, b } => a * z + b,
            LatencyKind::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &k| acc * z + k),
            LatencyKind::Piecewise(levels) => {
                let n = levels.len();
                levels[((z * n as f64).ceil() as usize).clamp(1, n) - 1]
            }
        }
    }

    /// Largest slope on `[0, 1]`; infinite for step latencies.
    pub fn max_slope(&self) -> f64 {
        match &self.kind {
            LatencyKind::Constant(_) => 0.0,
            LatencyKind::Linear { a, .. } => *a,
            // Nonnegative coefficients make the derivative nondecreasing.
            LatencyKind::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, k)| i as f64 * k)
                .sum(),
            LatencyKind::Piecewise(levels) => {
                if levels.windows(2).any(|w| w[1] > w[0]) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }
}

/// A link of a parallel network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub latency: LatencyFunction,
    #[serde(default)]
    pub toll: f64,
}

impl Link {
    pub fn new(latency: LatencyFunction, toll: f64) -> Self {
        Self { latency, toll }
    }
}

/// `K ≥ 2` parallel links between one source and one sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkSpec")]
pub struct ParallelNetwork {
    links: Vec<Link>,
}

#[derive(Deserialize)]
struct NetworkSpec {
    links: Vec<Link>,
}

impl TryFrom<NetworkSpec> for ParallelNetwork {
    type Error = Error;

    fn try_from(spec: NetworkSpec) -> Result<Self> {
        ParallelNetwork::new(spec.links)
    }
}

impl ParallelNetwork {
    pub fn new(links: Vec<Link>) -> Result<Self> {
        if links.len() < 2 {
            return Err(invalid("a parallel network needs at least two links"));
        }
        for l in &links {
            check_nonneg(l.toll, "toll")?;
        }
        Ok(Self { links })
    }

    /// Pigou's network: a constant-latency link and a `ℓ(z) = z` link.
    pub fn pigou(toll_constant: f64, toll_linear: f64) -> Result<Self> {
        Self::new(vec![
            Link::new(LatencyFunction::constant(1.0)?, toll_constant),
            Link::new(LatencyFunction::linear(1.0, 0.0)?, toll_linear),
        ])
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn tolls(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.toll).collect()
    }

    /// Same latencies, tolls replaced.
    pub fn with_tolls(&self, tolls: &[f64]) -> Result<Self> {
        if tolls.len() != self.links.len() {
            return Err(invalid("toll vector length does not match the network"));
        }
        Self::new(
            self.links
                .iter()
                .zip(tolls)
                .map(|(l, &t)| Link::new(l.latency.clone(), t))
                .collect(),
        )
    }

    /// Every toll multiplied by `lambda`.
    pub fn scale_tolls(&self, lambda: f64) -> Result<Self> {
        self.with_tolls(&self.tolls().iter().map(|t| t * lambda).collect::<Vec<_>>())
    }
}

/// How an agent combines income and edge costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    Cf1,
    Cf2,
    Canonical,
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostModel::Cf1 => "cf1",
            CostModel::Cf2 => "cf2",
            CostModel::Canonical => "canonical",
        })
    }
}

impl FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cf1" => Ok(CostModel::Cf1),
            "cf2" => Ok(CostModel::Cf2),
            "canonical" | "can" => Ok(CostModel::Canonical),
            other => Err(invalid(format!("unknown cost model '{other}'"))),
        }
    }
}

impl CostModel {
    /// `(linear, shift, inverse)` with cost `= linear·q + shift + inverse/q`.
    pub fn coefficients(self, latency: f64, toll: f64) -> (f64, f64, f64) {
        match self {
            CostModel::Cf1 => (0.0, latency, toll),
            CostModel::Cf2 | CostModel::Canonical => (latency, toll, 0.0),
        }
    }
}

fn eval_coefficients((linear, shift, inverse): (f64, f64, f64), q: f64) -> f64 {
    let mut v = linear * q + shift;
    if inverse != 0.0 {
        v += inverse / q;
    }
    v
}

/// Cost to an agent of income `income` on a path with the given latency and toll.
pub fn agent_cost(model: CostModel, income: f64, latency: f64, toll: f64) -> Result<f64> {
    if !(income >= 0.0) {
        return Err(Error::NonPositiveIncome { income });
    }
    if model == CostModel::Cf1 && income == 0.0 && toll > 0.0 {
        return Err(Error::NonPositiveIncome { income });
    }
    Ok(eval_coefficients(model.coefficients(latency, toll), income))
}

/// A finitary flow: interval `(a_i, a_{i+1}]` of income types uses `links[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    breakpoints: Vec<f64>,
    links: Vec<usize>,
}

impl Flow {
    pub fn new(breakpoints: Vec<f64>, links: Vec<usize>) -> Result<Self> {
        if breakpoints.len() != links.len() + 1 || links.is_empty() {
            return Err(invalid("a flow needs k links and k+1 breakpoints"));
        }
        if breakpoints[0] != 0.0 || breakpoints[breakpoints.len() - 1] != 1.0 {
            return Err(invalid("flow breakpoints must start at 0 and end at 1"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("flow breakpoints must be strictly increasing"));
        }
        Ok(Self { breakpoints, links })
    }

    /// Everybody on one link.
    pub fn single(link: usize) -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            links: vec![link],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn links(&self) -> &[usize] {
        &self.links
    }

    /// Index of the interval containing type `x` (intervals are open on the left).
    pub fn interval_of(&self, x: f64) -> usize {
        let i = self.breakpoints.partition_point(|&b| b < x);
        i.saturating_sub(1).min(self.links.len() - 1)
    }

    /// Mass on each of `k` links.
    pub fn congestion(&self, k: usize) -> Vec<f64> {
        let mut c = vec![0.0; k];
        for (i, &e) in self.links.iter().enumerate() {
            c[e] += self.breakpoints[i + 1] - self.breakpoints[i];
        }
        c
    }
}

/// One interval of a flow together with what its users pay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub link: usize,
    pub latency: f64,
    pub toll: f64,
}

/// A flow evaluated on a network: congestion, latencies and per-type costs.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub flow: Flow,
    /// Mass on each link.
    pub congestion: Vec<f64>,
    /// `ℓ_e(c_e)` for each link.
    pub latencies: Vec<f64>,
    pub tolls: Vec<f64>,
    /// Incomes `q(a_i)` at interior breakpoints.
    pub boundary_incomes: Vec<f64>,
    /// Worst indifference violation at interior breakpoints.
    pub residual: f64,
    /// Gauss-Seidel sweeps spent on the accepted link subset.
    pub sweeps: usize,
    model: CostModel,
    income: QuantileFunction,
}

impl EquilibriumResult {
    pub fn model(&self) -> CostModel {
        self.model
    }

    pub fn income(&self) -> &QuantileFunction {
        &self.income
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let bp = self.flow.breakpoints();
        self.flow
            .links()
            .iter()
            .enumerate()
            .map(move |(i, &e)| Segment {
                start: bp[i],
                end: bp[i + 1],
                link: e,
                latency: self.latencies[e],
                toll: self.tolls[e],
            })
    }

    fn segment_at(&self, x: f64) -> Segment {
        let i = self.flow.interval_of(x);
        self.segments().nth(i).expect("interval index in range")
    }

    /// `cost^F(x)` under the result's cost model.
    pub fn cost_at(&self, x: f64) -> f64 {
        let s = self.segment_at(x);
        eval_coefficients(
            self.model.coefficients(s.latency, s.toll),
            self.income.eval(x),
        )
    }

    /// Edge-cost sum `τ/q(x) + ℓ` of the path used by type `x`.
    pub fn path_cost_at(&self, x: f64) -> f64 {
        let s = self.segment_at(x);
        eval_coefficients(
            CostModel::Cf1.coefficients(s.latency, s.toll),
            self.income.eval(x),
        )
    }

    /// Cost of type `x` had it used `link` instead, at the current congestion.
    pub fn deviation_cost(&self, x: f64, link: usize) -> f64 {
        eval_coefficients(
            self.model
                .coefficients(self.latencies[link], self.tolls[link]),
            self.income.eval(x),
        )
    }

    /// `∫_0^1 x^k cost^F(x) dx` for `k ∈ {0, 1}`.
    pub fn cost_moment(&self, k: u8) -> Result<f64> {
        let mut acc = 0.0;
        for s in self.segments() {
            let (linear, shift, inverse) = self.model.coefficients(s.latency, s.toll);
            if linear != 0.0 {
                acc += linear * self.income.moment(s.start, s.end, k, Power::Direct)?;
            }
            if shift != 0.0 {
                acc += shift
                    * match k {
                        0 => s.end - s.start,
                        _ => 0.5 * (s.end * s.end - s.start * s.start),
                    };
            }
            if inverse != 0.0 {
                acc += inverse * self.income.moment(s.start, s.end, k, Power::Inverse)?;
            }
        }
        Ok(acc)
    }

    /// `SC = ∫_0^1 cost^F(x) dx`.
    pub fn social_cost(&self) -> Result<f64> {
        self.cost_moment(0)
    }

    /// `∫_0^1 ℓ_{F(x)}(c^F) dx = Σ_e c_e ℓ_e(c_e)`.
    pub fn actual_latency_total(&self) -> f64 {
        self.congestion
            .iter()
            .zip(&self.latencies)
            .map(|(c, l)| c * l)
            .sum()
    }

    pub fn toll_revenue(&self) -> f64 {
        self.congestion
            .iter()
            .zip(&self.tolls)
            .map(|(c, t)| c * t)
            .sum()
    }

    /// Largest `α` keeping every ex-post income `q(x) − α·cost^F(x)` nonnegative
    /// under `model`.
    pub fn max_admissible_alpha(&self, model: CostModel) -> f64 {
        let mut best = f64::INFINITY;
        for s in self.segments() {
            let q = self.income.eval_right(s.start);
            let bound = match model {
                CostModel::Cf2 | CostModel::Canonical => {
                    let denom = s.latency * q + s.toll;
                    let mut b = if denom > 0.0 {
                        q / denom
                    } else {
                        f64::INFINITY
                    };
                    if s.latency > 0.0 {
                        b = b.min(1.0 / s.latency);
                    }
                    b
                }
                CostModel::Cf1 => {
                    if q <= 0.0 {
                        if s.latency > 0.0 || s.toll > 0.0 {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    } else {
                        let denom = s.latency * q + s.toll;
                        if denom > 0.0 {
                            q * q / denom
                        } else {
                            f64::INFINITY
                        }
                    }
                }
            };
            best = best.min(bound);
        }
        best
    }
}

/// Evaluate an arbitrary flow on a network.
pub fn evaluate_flow(
    net: &ParallelNetwork,
    income: &QuantileFunction,
    model: CostModel,
    flow: Flow,
) -> Result<EquilibriumResult> {
    let k = net.len();
    if let Some(&e) = flow.links().iter().find(|&&e| e >= k) {
        return Err(invalid(format!("flow uses link {e} of a {k}-link network")));
    }
    let congestion = flow.congestion(k);
    let latencies: Vec<f64> = net
        .links()
        .iter()
        .zip(&congestion)
        .map(|(l, &c)| l.latency.eval(c))
        .collect();
    let tolls = net.tolls();
    if model == CostModel::Cf1 {
        for (i, &e) in flow.links().iter().enumerate() {
            let q = income.eval_right(flow.breakpoints()[i]);
            if q <= 0.0 && tolls[e] > 0.0 {
                return Err(Error::NonPositiveIncome { income: q });
            }
        }
    }
    let bp = flow.breakpoints();
    let boundary_incomes = bp[1..bp.len() - 1]
        .iter()
        .map(|&b| income.eval(b))
        .collect();
    let mut result = EquilibriumResult {
        flow,
        congestion,
        latencies,
        tolls,
        boundary_incomes,
        residual: 0.0,
        sweeps: 0,
        model,
        income: income.clone(),
    };
    result.residual = boundary_residual(&result);
    Ok(result)
}

/// Path costs in `f`-units (`ℓ + τ/q`) avoid the `0·∞` of the canonical form at
/// `q = 0` and give the same preference order for `q > 0`.
fn path_cost(latency: f64, toll: f64, q: f64) -> f64 {
    if toll == 0.0 {
        latency
    } else {
        latency + toll / q
    }
}

fn boundary_residual(r: &EquilibriumResult) -> f64 {
    let segs: Vec<Segment> = r.segments().collect();
    let mut worst: f64 = 0.0;
    for w in segs.windows(2) {
        let (l, rr) = (w[0], w[1]);
        let b = l.end;
        let q_minus = r.income.eval(b);
        let q_plus = r.income.eval_right(b);
        let cost =
            |s: &Segment, q: f64| eval_coefficients(r.model.coefficients(s.latency, s.toll), q);
        let v = if q_minus == q_plus {
            (cost(&l, q_minus) - cost(&rr, q_minus)).abs()
        } else {
            (cost(&l, q_minus) - cost(&rr, q_minus))
                .max(cost(&rr, q_plus) - cost(&l, q_plus))
                .max(0.0)
        };
        if v.is_finite() {
            worst = worst.max(v);
        } else {
            worst = f64::INFINITY;
        }
    }
    worst
}

/// Largest relative gain any type could get by deviating, checked exactly at the
/// income extremes of every interval (costs are monotone in income per link pair).
fn exact_violation(r: &EquilibriumResult) -> f64 {
    let mut worst: f64 = 0.0;
    for s in r.segments() {
        // Types below MIN_LOAD form a null set; probing q(0) would flag
        // deviations of no measurable mass.
        let lo = if s.start == 0.0 {
            r.income.eval(MIN_LOAD.min(0.5 * s.end))
        } else {
            r.income.eval_right(s.start)
        };
        let incomes = [lo, r.income.eval(s.end)];
        for &q in &incomes {
            let own = path_cost(s.latency, s.toll, q);
            for (e, (&lat, &toll)) in r.latencies.iter().zip(&r.tolls).enumerate() {
                if e == s.link {
                    continue;
                }
                let alt = path_cost(lat, toll, q);
                let gain = if own.is_infinite() && alt.is_infinite() {
                    // Both tolled at zero income: compare tolls.
                    s.toll - toll
                } else {
                    (own - alt) / (1.0 + own.abs())
                };
                worst = worst.max(gain);
            }
        }
    }
    worst
}

/// Sampled Nash check: for `samples` stratified types, the assigned cost may
/// exceed the best alternative by at most `tol`. Returns the verdict and the
/// worst deviation gain observed.
pub fn verify_equilibrium(
    result: &EquilibriumResult,
    net: &ParallelNetwork,
    income: &QuantileFunction,
    model: CostModel,
    samples: usize,
    tol: f64,
) -> (bool, f64) {
    let latencies: Vec<f64> = net
        .links()
        .iter()
        .zip(&result.congestion)
        .map(|(l, &c)| l.latency.eval(c))
        .collect();
    let tolls = net.tolls();
    let mut worst = f64::NEG_INFINITY;
    for j in 0..samples.max(1) {
        let x = (j as f64 + 0.5) / samples.max(1) as f64;
        let q = income.eval(x);
        let own_link = result.flow.links()[result.flow.interval_of(x)];
        let cost = |e: usize| eval_coefficients(model.coefficients(latencies[e], tolls[e]), q);
        let own = cost(own_link);
        let best_alt = (0..net.len())
            .filter(|&e| e != own_link)
            .map(cost)
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(own - best_alt);
    }
    (worst <= tol, worst)
}

/// Links ordered by nondecreasing toll, ties by index.
fn toll_order(net: &ParallelNetwork) -> Vec<usize> {
    let mut order: Vec<usize> = (0..net.len()).collect();
    order.sort_by(|&a, &b| {
        net.links()[a]
            .toll
            .total_cmp(&net.links()[b].toll)
            .then(a.cmp(&b))
    });
    order
}

/// Solve for the breakpoints of a flow using exactly the links in `used`
/// (listed in toll order) by Gauss-Seidel over the boundary indifference
/// conditions. Each coordinate update is an exact monotone bisection.
fn solve_breakpoints(
    net: &ParallelNetwork,
    income: &QuantileFunction,
    used: &[usize],
) -> (Vec<f64>, usize) {
    let m = used.len();
    let mut b: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    if m == 1 {
        return (b, 0);
    }
    let links = net.links();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut moved: f64 = 0.0;
        for k in 1..m {
            let left = &links[used[k - 1]];
            let right = &links[used[k]];
            let d_toll = right.toll - left.toll;
            let (lo, hi) = (b[k - 1], b[k + 1]);
            // Nondecreasing in the breakpoint: the cost of the slower, cheaper
            // link minus that of the faster, pricier one, in edge-cost units.
            let h = |x: f64| {
                let toll_term = if d_toll == 0.0 {
                    0.0
                } else {
                    d_toll / income.eval(x)
                };
                left.latency.eval(x - lo) - right.latency.eval(hi - x) - toll_term
            };
            let next = monotone_root(h, lo, hi);
            moved = moved.max((next - b[k]).abs());
            b[k] = next;
        }
        if moved <= SWEEP_TOL {
            break;
        }
    }
    (b, sweeps)
}

/// Bisection stops within an ulp of a jump in income; move such breakpoints
/// onto the jump so no sliver of the next income class changes sides.
fn snap_to_knots(bp: &mut [f64], knots: &[f64]) {
    let n = bp.len();
    for b in &mut bp[1..n - 1] {
        let i = knots.partition_point(|k| k < b);
        for &k in knots[i.saturating_sub(1)..(i + 1).min(knots.len())].iter() {
            if (k - *b).abs() <= KNOT_SNAP {
                *b = k;
            }
        }
    }
}

/// Equilibrium flow of a parallel network for an income distribution.
///
/// Used links carry contiguous income intervals with tolls nondecreasing and
/// latencies nonincreasing from poor to rich. Candidate sets of used links are
/// tried from smallest to largest (ties to the lowest link indices); for each,
/// the breakpoints solve the boundary indifference conditions, and the first
/// candidate that leaves no profitable deviation is returned.
pub fn equilibrium_parallel(
    net: &ParallelNetwork,
    income: &QuantileFunction,
    model: CostModel,
) -> Result<EquilibriumResult> {
    let order = toll_order(net);
    let k = order.len();
    if k > 16 {
        return Err(invalid("at most 16 parallel links are supported"));
    }
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << k))
        .map(|mask| {
            (0..k)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| order[i])
                .collect()
        })
        .collect();
    subsets.sort_by(|a: &Vec<usize>, b: &Vec<usize>| {
        let mut sa = a.clone();
        let mut sb = b.clone();
        sa.sort_unstable();
        sb.sort_unstable();
        a.len().cmp(&b.len()).then(sa.cmp(&sb))
    });

    let knots = income.knots();
    let mut best: Option<(f64, EquilibriumResult)> = None;
    for used in &subsets {
        let (mut bp, sweeps) = solve_breakpoints(net, income, used);
        snap_to_knots(&mut bp, &knots);
        if bp.windows(2).any(|w| w[1] - w[0] < MIN_LOAD) {
            continue;
        }
        let flow = Flow::new(bp, used.clone())?;
        let mut candidate = match evaluate_flow(net, income, model, flow) {
            Ok(c) => c,
            Err(Error::NonPositiveIncome { .. }) => continue,
            Err(e) => return Err(e),
        };
        candidate.sweeps = sweeps;
        let violation = exact_violation(&candidate);
        if violation <= ACCEPT_TOL {
            return Ok(candidate);
        }
        if !matches!(&best, Some((v, _)) if *v <= violation) {
            best = Some((violation, candidate));
        }
    }
    match best {
        Some((v, r)) if v <= 1e-6 => Ok(r),
        Some((v, r)) => Err(Error::NonConvergence {
            iterations: r.sweeps,
            residual: v,
        }),
        None => {
            // Every candidate degenerated; fall back to the cheapest single link.
            let flow = Flow::single(order[0]);
            let r = evaluate_flow(net, income, model, flow)?;
            let v = exact_violation(&r);
            if v <= 1e-6 {
                Ok(r)
            } else {
                Err(Error::NonConvergence {
                    iterations: 0,
                    residual: v,
                })
            }
        }
    }
}

/// Ex-post income `x ↦ q(x) − α·cost^F(x)` under `model`.
pub fn ex_post(
    income: &QuantileFunction,
    result: &EquilibriumResult,
    alpha: f64,
    model: CostModel,
) -> Result<QuantileFunction> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(invalid(format!(
            "alpha must be finite and nonnegative, got {alpha}"
        )));
    }
    let mut pieces = Vec::new();
    for s in result.segments() {
        let (linear, shift, inverse) = model.coefficients(s.latency, s.toll);
        let piece = IncomePiece {
            end: s.end,
            linear: 1.0 - alpha * linear,
            shift: -alpha * shift,
            inverse: -alpha * inverse,
        };
        let q_lo = income.eval_right(s.start);
        if piece.inverse != 0.0 && q_lo <= 0.0 {
            return Err(Error::AlphaTooLarge {
                alpha,
                quantile: s.start,
                income: f64::NEG_INFINITY,
            });
        }
        let lowest = piece.linear * q_lo
            + piece.shift
            + if piece.inverse != 0.0 {
                piece.inverse / q_lo
            } else {
                0.0
            };
        if lowest < 0.0 || piece.linear < 0.0 {
            return Err(Error::AlphaTooLarge {
                alpha,
                quantile: s.start,
                income: lowest,
            });
        }
        pieces.push(piece);
    }
    QuantileFunction::transformed(income.clone(), pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_x() -> QuantileFunction {
        QuantileFunction::power_law(1.0, 2.0).unwrap()
    }

    #[test]
    fn agent_cost_examples() {
        assert_eq!(
            agent_cost(CostModel::Canonical, 2.0, 1.0, 0.5).unwrap(),
            2.5
        );
        assert_eq!(agent_cost(CostModel::Cf1, 2.0, 1.0, 0.5).unwrap(), 1.25);
        assert_eq!(agent_cost(CostModel::Cf2, 2.0, 1.0, 0.5).unwrap(), 2.5);
        assert_eq!(
            agent_cost(CostModel::Canonical, 7.0, 0.0, 0.0).unwrap(),
            0.0
        );
        assert!(agent_cost(CostModel::Cf1, 0.0, 1.0, 0.5).is_err());
        assert!(agent_cost(CostModel::Canonical, -1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn untolled_pigou_puts_everyone_on_the_linear_link() {
        let net = ParallelNetwork::pigou(0.0, 0.0).unwrap();
        let r = equilibrium_parallel(&net, &two_x(), CostModel::Canonical).unwrap();
        assert_eq!(r.flow.links(), &[1]);
        assert_eq!(r.congestion, vec![0.0, 1.0]);
        assert_eq!(r.actual_latency_total(), 1.0);
    }

    #[test]
    fn tolled_pigou_switches_at_one_third() {
        let net = ParallelNetwork::pigou(0.0, 2.0 / 9.0).unwrap();
        let r = equilibrium_parallel(&net, &two_x(), CostModel::Canonical).unwrap();
        assert_eq!(r.flow.links(), &[0, 1]);
        assert!((r.congestion[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!(r.residual < 1e-12);
        assert!((r.social_cost().unwrap() - 23.0 / 27.0).abs() < 1e-14);
    }

    #[test]
    fn identical_links_split_evenly() {
        let lin = LatencyFunction::linear(1.0, 0.0).unwrap();
        let net =
            ParallelNetwork::new(vec![Link::new(lin.clone(), 0.0), Link::new(lin, 0.0)]).unwrap();
        for q in [
            two_x(),
            QuantileFunction::piecewise(vec![1.0, 2.0, 5.0]).unwrap(),
        ] {
            let r = equilibrium_parallel(&net, &q, CostModel::Canonical).unwrap();
            assert!((r.congestion[0] - 0.5).abs() < 1e-15);
            assert_eq!(r.residual, 0.0);
        }
    }

    #[test]
    fn equal_constant_links_send_everyone_to_the_lowest_index() {
        let c = LatencyFunction::constant(2.0).unwrap();
        let net = ParallelNetwork::new(vec![Link::new(c.clone(), 0.3), Link::new(c, 0.3)]).unwrap();
        let r = equilibrium_parallel(&net, &two_x(), CostModel::Canonical).unwrap();
        assert_eq!(r.flow.links(), &[0]);
    }

    #[test]
    fn verify_accepts_solver_output_and_rejects_perturbations() {
        let net = ParallelNetwork::pigou(0.0, 2.0 / 9.0).unwrap();
        let q = two_x();
        let r = equilibrium_parallel(&net, &q, CostModel::Canonical).unwrap();
        let (ok, gain) = verify_equilibrium(&r, &net, &q, CostModel::Canonical, 1000, 1e-10);
        assert!(ok, "gain {gain}");
        let shifted = Flow::new(vec![0.0, 1.0 / 3.0 + 0.05, 1.0], vec![0, 1]).unwrap();
        let bad = evaluate_flow(&net, &q, CostModel::Canonical, shifted).unwrap();
        let (ok, gain) = verify_equilibrium(&bad, &net, &q, CostModel::Canonical, 1000, 1e-10);
        assert!(!ok);
        assert!(gain > 0.0);
    }

    #[test]
    fn any_split_of_equal_constant_links_verifies() {
        let c = LatencyFunction::constant(1.0).unwrap();
        let net = ParallelNetwork::new(vec![Link::new(c.clone(), 0.0), Link::new(c, 0.0)]).unwrap();
        let q = two_x();
        let flow = Flow::new(vec![0.0, 0.37, 1.0], vec![1, 0]).unwrap();
        let r = evaluate_flow(&net, &q, CostModel::Canonical, flow).unwrap();
        assert!(verify_equilibrium(&r, &net, &q, CostModel::Canonical, 500, 0.0).0);
    }

    #[test]
    fn single_link_networks_are_rejected() {
        let l = Link::new(LatencyFunction::constant(1.0).unwrap(), 0.0);
        assert!(ParallelNetwork::new(vec![l]).is_err());
    }

    #[test]
    fn ex_post_examples() {
        let q = two_x();
        let net = ParallelNetwork::pigou(0.0, 0.5).unwrap();
        let r = equilibrium_parallel(&net, &q, CostModel::Canonical).unwrap();
        assert!((r.congestion[0] - 0.5).abs() < 1e-15);
        let post = ex_post(&q, &r, 0.1, CostModel::Canonical).unwrap();
        assert!((post.eval(1.0) - 1.85).abs() < 1e-15);
        let same = ex_post(&q, &r, 0.0, CostModel::Canonical).unwrap();
        for x in [0.0, 0.2, 0.5, 0.77, 1.0] {
            assert_eq!(same.eval(x), q.eval(x));
        }
        assert!(matches!(
            ex_post(&q, &r, 5.0, CostModel::Canonical),
            Err(Error::AlphaTooLarge { .. })
        ));
    }

    #[test]
    fn toll_free_constant_income_keeps_gini_zero() {
        let lin = LatencyFunction::linear(1.0, 0.0).unwrap();
        let net =
            ParallelNetwork::new(vec![Link::new(lin.clone(), 0.0), Link::new(lin, 0.0)]).unwrap();
        let q = QuantileFunction::constant(3.0).unwrap();
        let r = equilibrium_parallel(&net, &q, CostModel::Canonical).unwrap();
        let post = ex_post(&q, &r, 0.2, CostModel::Canonical).unwrap();
        assert_eq!(post.eval(0.1), post.eval(0.9));
        assert!(post.gini().unwrap().abs() < 1e-15);
    }

    #[test]
    fn pigou_latency_totals() {
        let q = two_x();
        let half = equilibrium_parallel(
            &ParallelNetwork::pigou(0.0, 0.5).unwrap(),
            &q,
            CostModel::Canonical,
        )
        .unwrap();
        assert!((half.actual_latency_total() - 0.75).abs() < 1e-15);
        let third = equilibrium_parallel(
            &ParallelNetwork::pigou(0.0, 2.0 / 9.0).unwrap(),
            &q,
            CostModel::Canonical,
        )
        .unwrap();
        assert!((third.social_cost().unwrap() - 23.0 / 27.0).abs() < 1e-14);
    }

    #[test]
    fn json_network_schema() {
        let net: ParallelNetwork = serde_json::from_str(
            r#"{"links":[{"latency":{"kind":"constant","c":1},"toll":0},
                         {"latency":{"kind":"linear","a":1,"b":0},"toll":0.25}]}"#,
        )
        .unwrap();
        assert_eq!(net.tolls(), vec![0.0, 0.25]);
        assert!(serde_json::from_str::<ParallelNetwork>(
            r#"{"links":[{"latency":{"kind":"constant","c":1},"toll":0}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<ParallelNetwork>(
            r#"{"links":[{"latency":{"kind":"linear","a":-1,"b":0},"toll":0},
                         {"latency":{"kind":"constant","c":1},"toll":0}]}"#
        )
        .is_err());
    }

    #[test]
    fn step_incomes_can_switch_at_a_cell_boundary() {
        // Boundary income jumps from 0.96875 to 1.03125 at x = 1/2; no type is
        // indifferent, yet both sides strictly prefer their own link.
        let values: Vec<f64> = (0..32).map(|i| 2.0 * (i as f64 + 0.5) / 32.0).collect();
        let q = QuantileFunction::piecewise(values).unwrap();
        let net = ParallelNetwork::pigou(0.0, 0.5).unwrap();
        let r = equilibrium_parallel(&net, &q, CostModel::Canonical).unwrap();
        assert!((r.congestion[0] - 0.5).abs() < 1e-14);
        assert!(verify_equilibrium(&r, &net, &q, CostModel::Canonical, 4096, 0.0).0);
    }
}
