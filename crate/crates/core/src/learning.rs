//! No-regret play with finitely many income levels.
//!
//! Giving every level `i` a private copy `ê_{i,e}` of each tolled link with
//! constant cost `τ_e / w_i` turns the income-typed game into an ordinary
//! multi-population congestion game whose path costs equal the time-unit
//! costs `ℓ_e + τ_e/w_i`. Each level then runs multiplicative weights over
//! its paths, and the Gini of ex-post incomes is tracked round by round.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::{agent_cost, equilibrium_parallel, ex_post, CostModel, ParallelNetwork};
use crate::income::{gini_weighted, QuantileFunction};

/// Income levels `w_1 < … < w_K` with their population masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeveledPopulation {
    levels: Vec<f64>,
    masses: Vec<f64>,
}

impl LeveledPopulation {
    pub fn new(levels: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.len() != masses.len() {
            return Err(invalid("need one mass per income level"));
        }
        if levels.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("income levels must be finite and positive"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("income levels must be strictly increasing"));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(invalid("level masses must be positive"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("level masses must sum to 1, got {total}")));
        }
        Ok(Self { levels, masses })
    }

    /// Equal masses on the given levels.
    pub fn uniform(levels: Vec<f64>) -> Result<Self> {
        let k = levels.len();
        Self::new(levels, vec![1.0 / k as f64; k])
    }

    /// `k` equal-mass levels at the cell midpoints of `q`.
    pub fn discretize(q: &QuantileFunction, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("need at least one level"));
        }
        Self::uniform(
            (0..k)
                .map(|i| q.eval((i as f64 + 0.5) / k as f64))
                .collect(),
        )
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// The step quantile function of an equal-mass population.
    pub fn to_quantile(&self) -> Result<QuantileFunction> {
        let m = self.masses[0];
        if self.masses.iter().any(|x| (x - m).abs() > 1e-15) {
            return Err(invalid("a step quantile function needs equal level masses"));
        }
        QuantileFunction::piecewise(self.levels.clone())
    }
}

/// The network with per-level auxiliary toll edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGame {
    net: ParallelNetwork,
    population: LeveledPopulation,
    /// `aux[i][e] = τ_e / w_i`.
    aux: Vec<Vec<f64>>,
}

/// Replace tolls by constant-cost edges private to each income level.
pub fn reduce(net: &ParallelNetwork, population: &LeveledPopulation) -> Result<ReducedGame> {
    let aux = population
        .levels
        .iter()
        .map(|&w| {
            net.links()
                .iter()
                .map(|l| if l.toll == 0.0 { 0.0 } else { l.toll / w })
                .collect()
        })
        .collect();
    Ok(ReducedGame {
        net: net.clone(),
        population: population.clone(),
        aux,
    })
}

impl ReducedGame {
    pub fn network(&self) -> &ParallelNetwork {
        &self.net
    }

    pub fn population(&self) -> &LeveledPopulation {
        &self.population
    }

    pub fn auxiliary_costs(&self) -> &[Vec<f64>] {
        &self.aux
    }

    pub fn auxiliary_edge_count(&self) -> usize {
        self.aux.iter().map(Vec::len).sum()
    }

    pub fn paths(&self) -> usize {
        self.net.len()
    }

    /// Cost of path `link` for level `level` at the given congestion.
    pub fn path_cost(&self, level: usize, link: usize, congestion: &[f64]) -> f64 {
        self.net.links()[link].latency.eval(congestion[link]) + self.aux[level][link]
    }

    /// Largest `|reduced path cost − time-unit agent cost|` over all levels and
    /// paths at the given congestion.
    pub fn payoff_gap(&self, congestion: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, &w) in self.population.levels.iter().enumerate() {
            for (e, link) in self.net.links().iter().enumerate() {
                let direct = agent_cost(
                    CostModel::Cf1,
                    w,
                    link.latency.eval(congestion[e]),
                    link.toll,
                )?;
                worst = worst.max((self.path_cost(i, e, congestion) - direct).abs());
            }
        }
        Ok(worst)
    }

    /// Upper bound on any path cost of level `i`.
    fn cost_bound(&self, i: usize) -> f64 {
        self.net
            .links()
            .iter()
            .zip(&self.aux[i])
            .map(|(l, a)| l.latency.eval(1.0) + a)
            .fold(0.0, f64::max)
    }
}

/// Learning-rate schedule for multiplicative weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `η_t = sqrt(8 ln|P| / t)`.
    Anytime,
    Constant(f64),
}

impl StepSchedule {
    fn eta(self, paths: usize, t: usize) -> f64 {
        match self {
            StepSchedule::Anytime => (8.0 * (paths as f64).ln() / t as f64).sqrt(),
            StepSchedule::Constant(eta) => eta,
        }
    }
}

/// Dynamics parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NoRegretConfig {
    pub rounds: usize,
    pub schedule: StepSchedule,
    /// Weight of the game in ex-post incomes `w − α(wℓ + τ)`.
    pub alpha: f64,
    /// Prior path distribution per level; uniform when absent.
    pub initial: Option<Vec<Vec<f64>>>,
}

impl Default for NoRegretConfig {
    fn default() -> Self {
        Self {
            rounds: 10_000,
            schedule: StepSchedule::Anytime,
            alpha: 0.01,
            initial: None,
        }
    }
}

/// Per-round record of the dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub round: usize,
    /// Mass on each link.
    pub congestion: Vec<f64>,
    /// Average regret `R_i(t)` of each level so far, in time units.
    pub regret: Vec<f64>,
    /// Gini of this round's ex-post incomes.
    pub gini: f64,
    /// Running mean of `gini`.
    pub gini_average: f64,
    /// Mass-weighted average gain from switching to a best path.
    pub deviation_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rounds: Vec<Round>,
    /// Path distribution of every level after the last round.
    pub final_strategies: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Round> {
        self.rounds.last()
    }

    pub fn time_average_gini(&self) -> Option<f64> {
        self.last().map(|r| r.gini_average)
    }

    pub fn max_final_regret(&self) -> Option<f64> {
        self.last()
            .map(|r| r.regret.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }
}

fn check_bounded_slopes(net: &ParallelNetwork) -> Result<()> {
    match net
        .links()
        .iter()
        .position(|l| !l.latency.max_slope().is_finite())
    {
        Some(e) => Err(invalid(format!("link {e} has unbounded latency slope"))),
        None => Ok(()),
    }
}

fn normalized(mut p: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = p.iter().sum();
    if !(total > 0.0) || p.iter().any(|x| !(*x >= 0.0)) {
        return Err(invalid(
            "initial strategies must be nonnegative with positive total",
        ));
    }
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// Play `strategy(t)` for every round and record the outcome. Shared by the
/// learning dynamics and fixed strategy profiles.
fn simulate<F>(game: &ReducedGame, rounds: usize, alpha: f64, mut strategy: F) -> Result<Trajectory>
where
    F: FnMut(usize, &[Vec<f64>]) -> Result<Vec<Vec<f64>>>,
{
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(invalid(format!(
            "alpha must be finite and nonnegative, got {alpha}"
        )));
    }
    let levels = game.population.len();
    let paths = game.paths();
    let links = game.net.links();
    let mut cumulative = vec![vec![0.0; paths]; levels];
    let mut expected = vec![0.0; levels];
    let mut gini_sum = 0.0;
    let mut out = Vec::with_capacity(rounds);
    let mut last = Vec::new();
    for t in 1..=rounds {
        let p = strategy(t, &cumulative)?;
        let mut congestion = vec![0.0; paths];
        for (i, pi) in p.iter().enumerate() {
            for e in 0..paths {
                congestion[e] += game.population.masses[i] * pi[e];
            }
        }
        let latency: Vec<f64> = links
            .iter()
            .zip(&congestion)
            .map(|(l, &c)| l.latency.eval(c))
            .collect();
        let mut cells = Vec::with_capacity(levels * paths);
        let mut deviation_gain = 0.0;
        for i in 0..levels {
            let w = game.population.levels[i];
            let mass = game.population.masses[i];
            let costs: Vec<f64> = (0..paths).map(|e| latency[e] + game.aux[i][e]).collect();
            let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
            for e in 0..paths {
                cumulative[i][e] += costs[e];
                expected[i] += p[i][e] * costs[e];
                deviation_gain += mass * p[i][e] * (costs[e] - best);
                cells.push((w - alpha * (w * latency[e] + links[e].toll), mass * p[i][e]));
            }
        }
        let gini = gini_weighted(&cells)?;
        gini_sum += gini;
        let regret = (0..levels)
            .map(|i| {
                let best = cumulative[i].iter().copied().fold(f64::INFINITY, f64::min);
                (expected[i] - best) / t as f64
            })
            .collect();
        out.push(Round {
            round: t,
            congestion,
            regret,
            gini,
            gini_average: gini_sum / t as f64,
            deviation_gain,
        });
        last = p;
    }
    Ok(Trajectory {
        rounds: out,
        final_strategies: last,
    })
}

/// Every level runs multiplicative weights on its own costs, normalized by
/// that level's largest possible path cost.
pub fn run_no_regret(game: &ReducedGame, config: &NoRegretConfig) -> Result<Trajectory> {
    check_bounded_slopes(&game.net)?;
    let levels = game.population.len();
    let paths = game.paths();
    let priors: Vec<Vec<f64>> = match &config.initial {
        Some(init) => {
            if init.len() != levels || init.iter().any(|p| p.len() != paths) {
                return Err(invalid(
                    "initial strategies need one distribution over paths per level",
                ));
            }
            init.iter()
                .cloned()
                .map(normalized)
                .collect::<Result<_>>()?
        }
        None => vec![vec![1.0 / paths as f64; paths]; levels],
    };
    let bounds: Vec<f64> = (0..levels)
        .map(|i| game.cost_bound(i).max(f64::MIN_POSITIVE))
        .collect();
    let schedule = config.schedule;
    simulate(game, config.rounds, config.alpha, |t, cumulative| {
        let eta = schedule.eta(paths, t);
        Ok((0..levels)
            .map(|i| {
                let low = cumulative[i].iter().copied().fold(f64::INFINITY, f64::min);
                let raw: Vec<f64> = (0..paths)
                    .map(|e| priors[i][e] * (-eta * (cumulative[i][e] - low) / bounds[i]).exp())
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / total).collect()
            })
            .collect())
    })
}

/// A fixed strategy profile played every round (no learning).
pub fn run_constant(
    game: &ReducedGame,
    rounds: usize,
    alpha: f64,
    strategies: Vec<Vec<f64>>,
) -> Result<Trajectory> {
    if strategies.len() != game.population.len()
        || strategies.iter().any(|p| p.len() != game.paths())
    {
        return Err(invalid("need one distribution over paths per level"));
    }
    let fixed: Vec<Vec<f64>> = strategies
        .into_iter()
        .map(normalized)
        .collect::<Result<_>>()?;
    simulate(game, rounds, alpha, |_, _| Ok(fixed.clone()))
}

/// Ex-post Gini at the equilibrium of an equal-mass population.
pub fn equilibrium_gini(
    net: &ParallelNetwork,
    population: &LeveledPopulation,
    alpha: f64,
) -> Result<f64> {
    let q = population.to_quantile()?;
    let eq = equilibrium_parallel(net, &q, CostModel::Canonical)?;
    ex_post(&q, &eq, alpha, CostModel::Canonical)?.gini()
}

/// Outcome of comparing a trajectory with the equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rounds: usize,
    pub time_average_gini: f64,
    pub equilibrium_gini: f64,
    pub gap: f64,
    pub epsilon: f64,
    pub max_regret: f64,
    /// Deviation-gain threshold defining an approximate equilibrium round.
    pub threshold: f64,
    /// Fraction of rounds above the threshold within the first quarter, half
    /// and all of the run.
    pub non_equilibrium_fraction: [f64; 3],
    /// `None` when the run is too short to judge.
    pub pass: Option<bool>,
}

/// Compare the time-averaged Gini to the equilibrium value and measure how
/// often play is far from equilibrium.
pub fn check_convergence(
    traj: &Trajectory,
    equilibrium_gini: f64,
    epsilon: f64,
) -> Result<ConvergenceReport> {
    let t = traj.rounds.len();
    let last = traj
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let threshold = epsilon;
    let fraction = |upto: usize| {
        let upto = upto.max(1).min(t);
        traj.rounds[..upto]
            .iter()
            .filter(|r| r.deviation_gain > threshold)
            .count() as f64
            / upto as f64
    };
    let fractions = [fraction(t / 4), fraction(t / 2), fraction(t)];
    let gap = (last.gini_average - equilibrium_gini).abs();
    let shrinking = fractions[2] == 0.0 || fractions[2] < fractions[0];
    let pass = if t < 4 {
        None
    } else {
        Some(gap <= epsilon && shrinking)
    };
    Ok(ConvergenceReport {
        rounds: t,
        time_average_gini: last.gini_average,
        equilibrium_gini,
        gap,
        epsilon,
        max_regret: traj.max_final_regret().unwrap_or(0.0),
        threshold,
        non_equilibrium_fraction: fractions,
        pass,
    })
}
