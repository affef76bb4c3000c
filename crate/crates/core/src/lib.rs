//! Income inequality effects of tolls in nonatomic congestion games.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymmetric;
pub mod error;
pub mod game;
pub mod income;
pub mod iniquity;
pub mod learning;
pub mod numeric;
pub mod pigou;
pub mod tradeoff;

pub use error::{Error, Result};
pub use game::{
    agent_cost, equilibrium_parallel, evaluate_flow, ex_post, verify_equilibrium, CostModel,
    EquilibriumResult, Flow, LatencyFunction, Link, ParallelNetwork,
};
pub use income::{gini_discrete, gini_weighted, LorenzCurve, QuantileFunction};
pub use iniquity::{
    check_scale_invariance, iniquity_analytic, iniquity_finite_difference, IniquityReport,
};
pub use learning::{
    check_convergence, reduce, run_no_regret, LeveledPopulation, NoRegretConfig, ReducedGame,
    Trajectory,
};
pub use tradeoff::{
    brute_force_optimal, derive_weights, dp_optimal, evaluate_allocation, Allocation,
    ObjectiveWeights, TradeoffInstance,
};
