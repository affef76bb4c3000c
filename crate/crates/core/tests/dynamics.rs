mod common;

use iniquity_core::asymmetric::{solve_fig7, solve_gamma2, DEFAULT_ALPHA};
use iniquity_core::game::ParallelNetwork;
use iniquity_core::income::QuantileFunction;
use iniquity_core::learning::{
    check_convergence, equilibrium_gini, reduce, run_constant, run_no_regret, LeveledPopulation,
    NoRegretConfig,
};
use iniquity_core::pigou::optimal_toll_scaled;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reduced_costs_equal_time_unit_costs(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let k = rng.gen_range(2..=4);
        let net = common::network(&mut rng, k);
        let mut levels: Vec<f64> = (0..rng.gen_range(1..=6)).map(|_| rng.gen_range(0.1..10.0)).collect();
        levels.sort_by(f64::total_cmp);
        let game = reduce(&net, &LeveledPopulation::uniform(levels).unwrap()).unwrap();
        let mut congestion: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = congestion.iter().sum();
        congestion.iter_mut().for_each(|c| *c /= total);
        prop_assert!(game.payoff_gap(&congestion).unwrap() <= 1e-14);
    }

    #[test]
    fn second_commodity_is_worse_off_within(x_star in 0.05f64..0.95) {
        let p = solve_gamma2(x_star, DEFAULT_ALPHA).unwrap();
        prop_assert!(p.indifference_gap.abs() <= 1e-12);
        prop_assert!((p.solved_upper_mass - p.f).abs() <= 1e-9);
        prop_assert!(p.restricted_difference() > 0.0);
    }
}

fn pigou_game(levels: usize) -> (ParallelNetwork, LeveledPopulation) {
    let q = QuantileFunction::unit_mean_power_law(1.0).unwrap();
    let net = ParallelNetwork::pigou(0.0, optimal_toll_scaled(1.0)).unwrap();
    (net, LeveledPopulation::discretize(&q, levels).unwrap())
}

#[test]
fn richer_levels_favor_the_tolled_link() {
    let (net, pop) = pigou_game(8);
    let game = reduce(&net, &pop).unwrap();
    let traj = run_no_regret(
        &game,
        &NoRegretConfig {
            rounds: 4000,
            ..Default::default()
        },
    )
    .unwrap();
    for w in traj.final_strategies.windows(2) {
        assert!(w[1][1] >= w[0][1] - 0.02, "{:?}", traj.final_strategies);
    }
}

#[test]
fn average_regret_shrinks() {
    let (net, pop) = pigou_game(8);
    let game = reduce(&net, &pop).unwrap();
    let traj = run_no_regret(
        &game,
        &NoRegretConfig {
            rounds: 8000,
            ..Default::default()
        },
    )
    .unwrap();
    // Per-level regret averaged over the 100 rounds ending at `t`.
    let smoothed = |t: usize, level: usize| {
        traj.rounds[t - 100..t]
            .iter()
            .map(|r| r.regret[level])
            .sum::<f64>()
            / 100.0
    };
    for level in 0..pop.len() {
        let checkpoints: Vec<f64> = [500, 1000, 2000, 4000, 8000]
            .iter()
            .map(|&t| smoothed(t, level))
            .collect();
        for w in checkpoints.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "level {level}: {checkpoints:?}");
        }
        assert!(checkpoints[4] <= 0.05);
    }
}

#[test]
fn fixed_non_equilibrium_play_is_rejected() {
    let (net, pop) = pigou_game(4);
    let game = reduce(&net, &pop).unwrap();
    let alpha = 0.01;
    let stuck = vec![vec![0.0, 1.0]; pop.len()];
    let traj = run_constant(&game, 400, alpha, stuck).unwrap();
    let target = equilibrium_gini(&net, &pop, alpha).unwrap();
    let report = check_convergence(&traj, target, 0.01).unwrap();
    assert_eq!(report.pass, Some(false));
    assert_eq!(report.non_equilibrium_fraction, [1.0; 3]);
}

#[test]
fn short_runs_are_not_judged() {
    let (net, pop) = pigou_game(2);
    let game = reduce(&net, &pop).unwrap();
    let traj = run_no_regret(
        &game,
        &NoRegretConfig {
            rounds: 3,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(check_convergence(&traj, 0.0, 0.01).unwrap().pass, None);
}

#[test]
fn first_instance_root_is_exact() {
    let r = solve_fig7(DEFAULT_ALPHA).unwrap();
    assert!(r.quadratic_residual.abs() <= 1e-12);
    assert!(r.boundary_residual.abs() <= 1e-10);
}
