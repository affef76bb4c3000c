//! Choosing tolls to trade total delay against post-game inequality on a
//! discrete instance: `n` income quantiles share `K` parallel links whose
//! integer delays step up with the number of quantiles using them.
//!
//! An allocation gives each used link a contiguous block of quantiles, with
//! delays falling and tolls rising towards the rich. Tolls are pinned by the
//! richest quantile of each slower block being indifferent. The objective
//! `Σ_i α_i d_i + β_i τ_i` linearizes `total delay + λ·Gini(q − δ)` where
//! `δ_i = q_i d_i + τ_i`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::income::{gini_discrete, gini_weighted};

/// Largest `K` accepted by [`dp_optimal`].
pub const MAX_LINKS: usize = 16;
/// Enumeration bounds of [`brute_force_optimal`].
pub const BRUTE_FORCE_MAX_LINKS: usize = 4;
pub const BRUTE_FORCE_MAX_QUANTILES: usize = 10;

/// Delay of a link as a function of how many quantiles use it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayTable {
    /// `delays[r-1]` is the delay with `r` quantiles on the link.
    pub delays: Vec<u32>,
}

impl DelayTable {
    pub fn new(delays: Vec<u32>) -> Self {
        Self { delays }
    }

    pub fn constant(d: u32, n: usize) -> Self {
        Self { delays: vec![d; n] }
    }

    pub fn at_load(&self, r: usize) -> u32 {
        self.delays[r - 1]
    }
}

fn default_importance() -> f64 {
    1.0
}

/// A discrete trade-off instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceSpec")]
pub struct TradeoffInstance {
    quantiles: Vec<f64>,
    links: Vec<DelayTable>,
    lambda: f64,
    importance: f64,
}

#[derive(Deserialize)]
struct InstanceSpec {
    quantiles: Vec<f64>,
    links: Vec<DelayTable>,
    #[serde(default)]
    lambda: f64,
    #[serde(default = "default_importance")]
    importance: f64,
}

impl TryFrom<InstanceSpec> for TradeoffInstance {
    type Error = Error;

    fn try_from(s: InstanceSpec) -> Result<Self> {
        TradeoffInstance::new(s.quantiles, s.links, s.lambda)?.with_importance(s.importance)
    }
}

impl TradeoffInstance {
    pub fn new(quantiles: Vec<f64>, links: Vec<DelayTable>, lambda: f64) -> Result<Self> {
        let n = quantiles.len();
        if n == 0 {
            return Err(invalid("at least one quantile is required"));
        }
        if links.is_empty() {
            return Err(invalid("at least one link is required"));
        }
        if links.len() > MAX_LINKS {
            return Err(invalid(format!("at most {MAX_LINKS} links are supported")));
        }
        if quantiles.iter().any(|q| !(q.is_finite() && *q > 0.0)) {
            return Err(invalid("quantiles must be finite and positive"));
        }
        if quantiles.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("quantiles must be nondecreasing"));
        }
        for (e, l) in links.iter().enumerate() {
            if l.delays.len() != n {
                return Err(invalid(format!(
                    "link {e} needs {n} delays, has {}",
                    l.delays.len()
                )));
            }
            if l.delays.contains(&0) {
                return Err(invalid(format!("link {e} has a delay below 1")));
            }
            if l.delays.windows(2).any(|w| w[1] < w[0]) {
                return Err(invalid(format!(
                    "link {e} delays must be nondecreasing in load"
                )));
            }
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(invalid(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(Self {
            quantiles,
            links,
            lambda,
            importance: 1.0,
        })
    }

    /// Weight `α` of the game in post-game incomes `q_i − α·δ_i`.
    pub fn with_importance(mut self, importance: f64) -> Result<Self> {
        if !(importance.is_finite() && importance >= 0.0) {
            return Err(invalid(format!(
                "importance must be finite and nonnegative, got {importance}"
            )));
        }
        self.importance = importance;
        Ok(self)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.quantiles.clone(), self.links.clone(), lambda)?
            .with_importance(self.importance)
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    pub fn links(&self) -> &[DelayTable] {
        &self.links
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn importance(&self) -> f64 {
        self.importance
    }

    pub fn n(&self) -> usize {
        self.quantiles.len()
    }

    /// Number of distinct delay values over all links.
    pub fn distinct_delays(&self) -> usize {
        let mut all: Vec<u32> = self
            .links
            .iter()
            .flat_map(|l| l.delays.iter().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    }
}

/// Per-quantile objective weights, kept as numerators over a shared
/// denominator so integer data gives exact objectives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveWeights {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(skip)]
    alpha_num: Vec<f64>,
    #[serde(skip)]
    beta_num: Vec<f64>,
    #[serde(skip)]
    denominator: f64,
}

impl ObjectiveWeights {
    fn numerator(&self, delays: &[u32], tolls: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..delays.len() {
            acc += self.alpha_num[i] * f64::from(delays[i]) + self.beta_num[i] * tolls[i];
        }
        acc
    }

    /// `Σ_i α_i d_i + β_i τ_i`.
    pub fn objective(&self, delays: &[u32], tolls: &[f64]) -> f64 {
        self.numerator(delays, tolls) / self.denominator
    }
}

/// `α_i = 1 + λ'(n+1−i)q_i`, `β_i = λ'(n+1−i)` with `λ' = 2λ/(n·Σq)`.
pub fn derive_weights(q: &[f64], lambda: f64) -> Result<ObjectiveWeights> {
    let n = q.len();
    let total: f64 = q.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedGini { mean: total });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    let denominator = n as f64 * total;
    let rank = |i: usize| (n - i) as f64;
    let beta_num: Vec<f64> = (0..n).map(|i| 2.0 * lambda * rank(i)).collect();
    let alpha_num: Vec<f64> = (0..n).map(|i| denominator + beta_num[i] * q[i]).collect();
    Ok(ObjectiveWeights {
        alpha: alpha_num.iter().map(|a| a / denominator).collect(),
        beta: beta_num.iter().map(|b| b / denominator).collect(),
        alpha_num,
        beta_num,
        denominator,
    })
}

/// Contiguous quantiles `first..=last` (1-based) on one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub link: usize,
    pub first: usize,
    pub last: usize,
    pub delay: u32,
    pub toll: f64,
}

impl Block {
    pub fn size(&self) -> usize {
        self.last + 1 - self.first
    }
}

/// Blocks from poorest to richest, with the objective they attain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub blocks: Vec<Block>,
    pub objective: f64,
}

impl Allocation {
    /// Build from `(link, size)` pairs, poorest block first. Tolls start at 0
    /// and rise by `q_b·(d_prev − d_next)` at each boundary quantile `b`.
    pub fn from_blocks(
        inst: &TradeoffInstance,
        weights: &ObjectiveWeights,
        plan: &[(usize, usize)],
    ) -> Result<Self> {
        let n = inst.n();
        let mut blocks: Vec<Block> = Vec::with_capacity(plan.len());
        let mut next = 1;
        let mut used = vec![false; inst.links.len()];
        for &(link, size) in plan {
            if link >= inst.links.len() || size == 0 {
                return Err(invalid(
                    "allocation references a missing link or an empty block",
                ));
            }
            if std::mem::replace(&mut used[link], true) {
                return Err(invalid(format!("link {link} is used twice")));
            }
            let delay = inst.links[link].at_load(size);
            let toll = match blocks.last() {
                None => 0.0,
                Some(prev) => {
                    if delay > prev.delay {
                        return Err(invalid("block delays must be nonincreasing with income"));
                    }
                    prev.toll + inst.quantiles[prev.last - 1] * f64::from(prev.delay - delay)
                }
            };
            blocks.push(Block {
                link,
                first: next,
                last: next + size - 1,
                delay,
                toll,
            });
            next += size;
        }
        if next != n + 1 {
            return Err(invalid("blocks must cover every quantile exactly once"));
        }
        let mut a = Self {
            blocks,
            objective: 0.0,
        };
        a.objective = weights.objective(&a.delays(), &a.tolls());
        Ok(a)
    }

    pub fn delays(&self) -> Vec<u32> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.delay, b.size()))
            .collect()
    }

    pub fn tolls(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.toll, b.size()))
            .collect()
    }

    pub fn plan(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(|b| (b.link, b.size())).collect()
    }

    fn tie_key(&self) -> TieKey {
        (
            self.blocks.iter().map(|b| b.link).collect(),
            self.blocks.iter().map(Block::size).collect(),
        )
    }
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// `a` strictly better than `b` (lower objective, then lexicographically
/// smaller link sequence, then block sizes).
/// Link sequence, then block sizes, poorest first.
type TieKey = (Vec<usize>, Vec<usize>);

fn better(a: (f64, &TieKey), b: (f64, &TieKey)) -> bool {
    if ties(a.0, b.0) {
        a.1 < b.1
    } else {
        a.0 < b.0
    }
}

/// Exhaustive search over ordered block partitions and injective link
/// assignments.
pub fn brute_force_optimal(
    inst: &TradeoffInstance,
    weights: &ObjectiveWeights,
) -> Result<Allocation> {
    let (n, k) = (inst.n(), inst.links.len());
    if k > BRUTE_FORCE_MAX_LINKS || n > BRUTE_FORCE_MAX_QUANTILES {
        return Err(Error::TooLarge(format!(
            "{k} links and {n} quantiles (limits {BRUTE_FORCE_MAX_LINKS} and {BRUTE_FORCE_MAX_QUANTILES})"
        )));
    }
    let mut best: Option<(Allocation, TieKey)> = None;
    let mut sizes = Vec::new();
    let mut links = Vec::new();
    enumerate_compositions(n, k, &mut sizes, &mut |sizes| {
        enumerate_arrangements(k, sizes.len(), &mut links, &mut |links| {
            let plan: Vec<(usize, usize)> =
                links.iter().copied().zip(sizes.iter().copied()).collect();
            if let Ok(a) = Allocation::from_blocks(inst, weights, &plan) {
                let key = a.tie_key();
                let replace = match &best {
                    None => true,
                    Some((b, bk)) => better((a.objective, &key), (b.objective, bk)),
                };
                if replace {
                    best = Some((a, key));
                }
            }
        });
    });
    best.map(|(a, _)| a)
        .ok_or_else(|| invalid("no feasible allocation"))
}

fn enumerate_compositions(
    remaining: usize,
    parts_left: usize,
    acc: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    if remaining == 0 {
        f(acc);
        return;
    }
    if parts_left == 0 {
        return;
    }
    for s in 1..=remaining {
        acc.push(s);
        enumerate_compositions(remaining - s, parts_left - 1, acc, f);
        acc.pop();
    }
}

fn enumerate_arrangements(k: usize, len: usize, acc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if acc.len() == len {
        f(acc);
        return;
    }
    for e in 0..k {
        if !acc.contains(&e) {
            acc.push(e);
            enumerate_arrangements(k, len, acc, f);
            acc.pop();
        }
    }
}

#[derive(Clone)]
struct Continuation {
    cost: f64,
    key: TieKey,
}

/// Subset dynamic program over states `(S, m, d)`: link set `S` serves the
/// poorest `m` quantiles and its richest block has delay `d`.
///
/// Each toll increment `q_m·(d − d')` raises the toll of every richer
/// quantile, so it is charged once with the suffix sum of their `β` weights.
/// States are solved from `m = n` downwards, keeping for each the cheapest
/// completion (ties: lexicographically smallest link sequence, then sizes).
pub fn dp_optimal(inst: &TradeoffInstance, weights: &ObjectiveWeights) -> Result<Allocation> {
    let (n, k) = (inst.n(), inst.links.len());
    let mut levels: Vec<u32> = inst
        .links
        .iter()
        .flat_map(|l| l.delays.iter().copied())
        .collect();
    levels.sort_unstable();
    levels.dedup();
    let dn = levels.len();
    let level_of = |d: u32| levels.binary_search(&d).expect("delay level present");

    // Prefix sums of α numerators and suffix sums of β numerators.
    let mut alpha_prefix = vec![0.0; n + 1];
    for i in 0..n {
        alpha_prefix[i + 1] = alpha_prefix[i] + weights.alpha_num[i];
    }
    let mut beta_suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        beta_suffix[i] = beta_suffix[i + 1] + weights.beta_num[i];
    }

    let masks = 1usize << k;
    let idx = |mask: usize, m: usize, di: usize| (mask * (n + 1) + m) * dn + di;
    let mut table: Vec<Option<Continuation>> = vec![None; masks * (n + 1) * dn];

    // Cheapest way to finish from (mask, m) given the previous block's delay
    // (None before the first block).
    let extend = |table: &[Option<Continuation>], mask: usize, m: usize, prev: Option<u32>| {
        let mut best: Option<Continuation> = None;
        for e in (0..k).filter(|e| mask & (1 << e) == 0) {
            for r in 1..=n - m {
                let d = inst.links[e].at_load(r);
                if prev.is_some_and(|p| d > p) {
                    continue;
                }
                let Some(rest) = &table[idx(mask | (1 << e), m + r, level_of(d))] else {
                    continue;
                };
                let mut cost = (alpha_prefix[m + r] - alpha_prefix[m]) * f64::from(d) + rest.cost;
                if let Some(p) = prev {
                    cost += inst.quantiles[m - 1] * f64::from(p - d) * beta_suffix[m];
                }
                let mut links = Vec::with_capacity(rest.key.0.len() + 1);
                links.push(e);
                links.extend_from_slice(&rest.key.0);
                let mut sizes = Vec::with_capacity(links.len());
                sizes.push(r);
                sizes.extend_from_slice(&rest.key.1);
                let cand = Continuation {
                    cost,
                    key: (links, sizes),
                };
                let replace = match &best {
                    None => true,
                    Some(b) => better((cand.cost, &cand.key), (b.cost, &b.key)),
                };
                if replace {
                    best = Some(cand);
                }
            }
        }
        best
    };

    for mask in 1..masks {
        for di in 0..dn {
            table[idx(mask, n, di)] = Some(Continuation {
                cost: 0.0,
                key: (Vec::new(), Vec::new()),
            });
        }
    }
    for m in (1..n).rev() {
        for mask in 1..masks {
            let used = mask.count_ones() as usize;
            if used > m || used == k {
                continue;
            }
            for di in 0..dn {
                let best = extend(&table, mask, m, Some(levels[di]));
                table[idx(mask, m, di)] = best;
            }
        }
    }
    let best = extend(&table, 0, 0, None).ok_or_else(|| invalid("no feasible allocation"))?;
    let plan: Vec<(usize, usize)> = best.key.0.into_iter().zip(best.key.1).collect();
    Allocation::from_blocks(inst, weights, &plan)
}

/// Objective and inequality of an allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub objective: f64,
    pub total_delay: f64,
    pub gini_ex_ante: f64,
    /// Ex-ante Gini plus the linearized equality penalty
    /// `2·Σ(n+1−i)·δ_i / (n·Σq)`, so that
    /// `objective = total_delay + λ·(gini_linearized − gini_ex_ante)`.
    pub gini_linearized: f64,
    /// Exact Gini of `max(q − α·δ, 0)`; `None` if every income is wiped out.
    pub gini_ex_post: Option<f64>,
    /// Number of quantiles whose post-game income went negative.
    pub negative_incomes: usize,
    pub post_incomes: Vec<f64>,
}

pub fn evaluate_allocation(
    inst: &TradeoffInstance,
    weights: &ObjectiveWeights,
    alloc: &Allocation,
) -> Result<AllocationReport> {
    let delays = alloc.delays();
    let tolls = alloc.tolls();
    if delays.len() != inst.n() {
        return Err(invalid("allocation does not cover the instance"));
    }
    let q = &inst.quantiles;
    let n = q.len();
    let total: f64 = q.iter().sum();
    let spent: Vec<f64> = (0..n)
        .map(|i| q[i] * f64::from(delays[i]) + tolls[i])
        .collect();
    let ranked: f64 = spent
        .iter()
        .enumerate()
        .map(|(i, s)| (n - i) as f64 * s)
        .sum();
    let gini_ex_ante = gini_discrete(q)?;
    let raw: Vec<f64> = (0..n).map(|i| q[i] - inst.importance * spent[i]).collect();
    let negative_incomes = raw.iter().filter(|v| **v < 0.0).count();
    let clipped: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let gini_ex_post = if clipped.iter().any(|v| *v > 0.0) {
        Some(gini_weighted(
            &clipped.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    Ok(AllocationReport {
        objective: weights.objective(&delays, &tolls),
        total_delay: delays.iter().map(|&d| f64::from(d)).sum(),
        gini_ex_ante,
        gini_linearized: gini_ex_ante + 2.0 * ranked / (n as f64 * total),
        gini_ex_post,
        negative_incomes,
        post_incomes: raw,
    })
}
