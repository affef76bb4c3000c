use std::io::Write;
use std::path::Path;

use iniquity_core::asymmetric::{
    default_gamma2_grid, gamma2_sweep, solve_fig7, solve_gamma2, Gamma2Point,
};
use iniquity_core::game::{
    equilibrium_parallel, ex_post, verify_equilibrium, CostModel, EquilibriumResult,
    ParallelNetwork,
};
use iniquity_core::income::{gini_discrete, QuantileFunction};
use iniquity_core::iniquity::{
    check_scale_invariance, default_alpha_grid, iniquity_finite_difference, GiniComponents,
};
use iniquity_core::learning::{
    check_convergence, equilibrium_gini, reduce, run_no_regret, LeveledPopulation, NoRegretConfig,
    StepSchedule,
};
use iniquity_core::pigou::{locate_minimum, solve_at_switchpoint, toll_for_switchpoint, Curve};
use iniquity_core::tradeoff::{
    brute_force_optimal, derive_weights, dp_optimal, evaluate_allocation, Allocation,
    AllocationReport, ObjectiveWeights,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::{csv_writer, num, read_json, write_json};
use crate::{random, AsymArgs, Experiment, Format, LearnArgs, Method, Suite, TradeoffArgs};

/// Largest analytic/finite-difference gap accepted by `iniquity`.
pub const AGREEMENT_TOL: f64 = 1e-5;

pub fn pigou_sweep(beta: f64, points: usize, curve: Curve, out: Option<&Path>) -> Result<()> {
    let q = QuantileFunction::unit_mean_power_law(beta)?;
    let rows: Vec<(f64, f64, f64)> = (0..points)
        .into_par_iter()
        .map(|i| {
            let c = i as f64 / (points - 1) as f64;
            Ok((c, toll_for_switchpoint(&q, c)?, curve.numeric(&q, c)?))
        })
        .collect::<iniquity_core::Result<_>>()?;
    let min = locate_minimum(&q, curve)?;
    let mut w = csv_writer(out)?;
    w.write_record(["kind", "c", "tau", "value"])?;
    for (c, tau, v) in rows {
        w.write_record(["grid", &num(c), &num(tau), &num(v)])?;
    }
    w.write_record(["min", &num(min.0), &num(min.1), &num(min.2)])?;
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct IniquityInstance {
    network: ParallelNetwork,
    income: QuantileFunction,
    #[serde(default = "canonical")]
    model: CostModel,
}

fn canonical() -> CostModel {
    CostModel::Canonical
}

#[derive(Serialize)]
struct FiniteDifferenceOut {
    alphas: Vec<f64>,
    gini_ex_post: Vec<f64>,
    estimate: f64,
}

#[derive(Serialize)]
struct IniquityOut {
    model: CostModel,
    gini_ex_ante: f64,
    iniquity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    analytic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    components: Option<GiniComponents>,
    #[serde(skip_serializing_if = "Option::is_none")]
    finite_difference: Option<FiniteDifferenceOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
}

/// The default halving grid, shrunk when ex-post incomes would turn negative.
fn admissible_grid(eq: &EquilibriumResult) -> Vec<f64> {
    let grid = default_alpha_grid();
    let top = grid.iter().cloned().fold(0.0, f64::max);
    let limit = 0.5 * eq.max_admissible_alpha(eq.model());
    let shrink = if limit < top { limit / top } else { 1.0 };
    grid.into_iter().map(|a| a * shrink).collect()
}

pub fn iniquity(
    beta: Option<f64>,
    instance: Option<&Path>,
    method: Method,
    out: Option<&Path>,
) -> Result<()> {
    let (q, eq) = match (beta, instance) {
        (Some(beta), None) => {
            let q = QuantileFunction::unit_mean_power_law(beta)?;
            let eq = solve_at_switchpoint(&q, 0.5, CostModel::Canonical)?;
            (q, eq)
        }
        (None, Some(path)) => {
            let inst: IniquityInstance = read_json(path)?;
            let eq = equilibrium_parallel(&inst.network, &inst.income, inst.model)?;
            (inst.income, eq)
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --beta and --instance".into(),
            ))
        }
    };
    let components = match method {
        Method::Analytic | Method::Both => Some(GiniComponents::new(&q, &eq)?),
        Method::Fd => None,
    };
    let analytic = components.as_ref().map(|c| c.iniquity()).transpose()?;
    let finite_difference = match method {
        Method::Fd | Method::Both => {
            let fd = iniquity_finite_difference(&q, &eq, &admissible_grid(&eq))?;
            Some(FiniteDifferenceOut {
                alphas: fd.alphas,
                gini_ex_post: fd.gini_ex_post,
                estimate: fd.estimate,
            })
        }
        Method::Analytic => None,
    };
    let gap = analytic
        .zip(finite_difference.as_ref())
        .map(|(a, fd)| (a - fd.estimate).abs());
    let report = IniquityOut {
        model: eq.model(),
        gini_ex_ante: q.gini()?,
        iniquity: analytic
            .or(finite_difference.as_ref().map(|f| f.estimate))
            .expect("some method ran"),
        analytic,
        components,
        finite_difference,
        gap,
    };
    write_json(out, &report)?;
    match gap {
        Some(g) if g > AGREEMENT_TOL => Err(CliError::Disagreement(format!(
            "analytic and finite-difference iniquity differ by {g:e} (tolerance {AGREEMENT_TOL:e})"
        ))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct OracleOut {
    allocation: Allocation,
    agrees: bool,
}

#[derive(Serialize)]
struct TradeoffOut {
    lambda: f64,
    importance: f64,
    weights: ObjectiveWeights,
    allocation: Allocation,
    report: AllocationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleOut>,
}

pub fn tradeoff(args: &TradeoffArgs, out: Option<&Path>) -> Result<()> {
    let mut inst: iniquity_core::tradeoff::TradeoffInstance = read_json(&args.instance)?;
    if let Some(lambda) = args.lambda {
        inst = inst.with_lambda(lambda)?;
    }
    if let Some(importance) = args.importance {
        inst = inst.with_importance(importance)?;
    }
    let weights = derive_weights(inst.quantiles(), inst.lambda())?;
    let allocation = dp_optimal(&inst, &weights)?;
    let report = evaluate_allocation(&inst, &weights, &allocation)?;
    if report.negative_incomes > 0 {
        eprintln!(
            "warning: {} post-game incomes are negative; the Gini is computed on clipped values",
            report.negative_incomes
        );
    }
    let oracle = if args.oracle {
        let bf = brute_force_optimal(&inst, &weights)?;
        let agrees = bf.objective == allocation.objective && bf.plan() == allocation.plan();
        Some(OracleOut {
            allocation: bf,
            agrees,
        })
    } else {
        None
    };
    let mismatch = oracle.as_ref().filter(|o| !o.agrees).map(|o| {
        format!(
            "DP objective {} but brute force {}",
            allocation.objective, o.allocation.objective
        )
    });
    write_json(
        out,
        &TradeoffOut {
            lambda: inst.lambda(),
            importance: inst.importance(),
            weights,
            allocation,
            report,
            oracle,
        },
    )?;
    mismatch.map_or(Ok(()), |m| Err(CliError::OracleMismatch(m)))
}

pub fn learn(args: &LearnArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let net: ParallelNetwork = read_json(&args.network)?;
    let q = QuantileFunction::unit_mean_power_law(args.beta)?;
    let population = LeveledPopulation::discretize(&q, args.levels)?;
    let game = reduce(&net, &population)?;
    let config = NoRegretConfig {
        rounds: args.rounds,
        schedule: args
            .eta
            .map_or(StepSchedule::Anytime, StepSchedule::Constant),
        alpha: args.alpha,
        initial: seed
            .map(|s| random::strategies(&mut random::rng(s, 0), population.len(), game.paths())),
    };
    let traj = run_no_regret(&game, &config)?;

    let mut w = csv_writer(out)?;
    let mut header = vec!["round".to_string()];
    header.extend((0..net.len()).map(|e| format!("congestion_{e}")));
    header.extend(["gini", "gini_average", "max_regret", "deviation_gain"].map(String::from));
    w.write_record(&header)?;
    for r in &traj.rounds {
        let mut row = vec![r.round.to_string()];
        row.extend(r.congestion.iter().map(|&c| num(c)));
        row.push(num(r.gini));
        row.push(num(r.gini_average));
        row.push(num(r.regret.iter().cloned().fold(0.0, f64::max)));
        row.push(num(r.deviation_gain));
        w.write_record(&row)?;
    }
    w.flush()?;

    if let Some(eps) = args.epsilon {
        let target = equilibrium_gini(&net, &population, args.alpha)?;
        let report = check_convergence(&traj, target, eps)?;
        eprintln!(
            "time-average Gini {} vs equilibrium {} (gap {}); far-from-equilibrium fractions {:?}",
            num(report.time_average_gini),
            num(target),
            num(report.gap),
            report.non_equilibrium_fraction.map(num)
        );
        if report.pass == Some(false) {
            return Err(CliError::Disagreement(format!(
                "play did not settle within {eps}"
            )));
        }
    }
    Ok(())
}

pub fn asym(args: &AsymArgs, out: Option<&Path>) -> Result<()> {
    match args.experiment {
        Experiment::Fig7 => {
            let report = solve_fig7(args.alpha)?;
            match args.format.unwrap_or(Format::Json) {
                Format::Json => write_json(out, &report),
                Format::Csv => {
                    let mut w = csv_writer(out)?;
                    w.write_record([
                        "tolled_mass",
                        "G_q",
                        "G_q0",
                        "G_qhat",
                        "G_q_D2",
                        "G_q0_D2",
                        "G_qhat_D2",
                    ])?;
                    w.write_record(
                        [
                            report.tolled_mass,
                            report.gini_ex_ante,
                            report.gini_q0,
                            report.gini_qhat,
                            report.gini_ex_ante_d2,
                            report.gini_q0_d2,
                            report.gini_qhat_d2,
                        ]
                        .map(num),
                    )?;
                    w.flush()?;
                    Ok(())
                }
            }
        }
        Experiment::Gamma2 => {
            let grid = args.grid.clone().unwrap_or_else(default_gamma2_grid);
            match args.format.unwrap_or(Format::Csv) {
                Format::Json => write_json(out, &gamma2_sweep(&grid, args.alpha)?),
                Format::Csv => {
                    let points: Vec<Gamma2Point> = grid
                        .par_iter()
                        .map(|&x| solve_gamma2(x, args.alpha))
                        .collect::<iniquity_core::Result<_>>()?;
                    let mut w = csv_writer(out)?;
                    w.write_record(["x_star", "tau", "G_q0", "G_qhat", "G_q0_D2", "G_qhat_D2"])?;
                    for p in points {
                        w.write_record(
                            [
                                p.x_star,
                                p.tau,
                                p.gini_q0,
                                p.gini_qhat,
                                p.gini_q0_d2,
                                p.gini_qhat_d2,
                            ]
                            .map(num),
                        )?;
                    }
                    w.flush()?;
                    Ok(())
                }
            }
        }
    }
}

pub fn gini(values: &[f64], out: Option<&Path>) -> Result<()> {
    let g = gini_discrete(values)?;
    let mut w = crate::output::sink(out)?;
    writeln!(w, "{}", num(g))?;
    w.flush()?;
    Ok(())
}

struct CheckRow {
    model: String,
    metric: f64,
    pass: bool,
}

fn check_one(suite: Suite, seed: u64, i: u64) -> iniquity_core::Result<CheckRow> {
    let mut rng = random::rng(seed, i);
    match suite {
        Suite::Theorem => {
            let model = if i.is_multiple_of(2) {
                CostModel::Cf1
            } else {
                CostModel::Cf2
            };
            let net = random::network(&mut rng)?;
            let q = random::income(&mut rng, model == CostModel::Cf1)?;
            let eq = equilibrium_parallel(&net, &q, model)?;
            let alpha = (0.5 * eq.max_admissible_alpha(model)).min(0.05);
            let diff = ex_post(&q, &eq, alpha, model)?.gini()? - q.gini()?;
            Ok(CheckRow {
                model: model.to_string(),
                metric: diff,
                pass: diff >= -1e-10,
            })
        }
        Suite::Scale => {
            let net = random::network(&mut rng)?;
            let q = random::income(&mut rng, false)?;
            let gap = check_scale_invariance(&q, &net, &[0.5, 2.0, 10.0])?.max_gap;
            Ok(CheckRow {
                model: CostModel::Canonical.to_string(),
                metric: gap,
                pass: gap <= 1e-8,
            })
        }
        Suite::Dp => {
            let inst = random::tradeoff(&mut rng)?;
            let w = derive_weights(inst.quantiles(), inst.lambda())?;
            let dp = dp_optimal(&inst, &w)?;
            let bf = brute_force_optimal(&inst, &w)?;
            Ok(CheckRow {
                model: "tradeoff".into(),
                metric: (dp.objective - bf.objective).abs(),
                pass: dp.objective == bf.objective,
            })
        }
        Suite::Equilibrium => {
            let model = [CostModel::Cf1, CostModel::Cf2, CostModel::Canonical][(i % 3) as usize];
            let net = random::network(&mut rng)?;
            let q = random::income(&mut rng, model == CostModel::Cf1)?;
            let eq = equilibrium_parallel(&net, &q, model)?;
            let (ok, gain) = verify_equilibrium(&eq, &net, &q, model, 2048, 1e-8);
            Ok(CheckRow {
                model: model.to_string(),
                metric: gain,
                pass: ok,
            })
        }
    }
}

pub fn check(suite: Suite, instances: u64, seed: u64, out: Option<&Path>) -> Result<()> {
    let rows: Vec<(u64, std::result::Result<CheckRow, String>)> = (0..instances)
        .into_par_iter()
        .map(|i| (i, check_one(suite, seed, i).map_err(|e| e.to_string())))
        .collect();
    let mut w = csv_writer(out)?;
    w.write_record(["instance", "model", "metric", "pass", "error"])?;
    let mut failures = 0;
    for (i, row) in &rows {
        match row {
            Ok(r) => {
                failures += usize::from(!r.pass);
                w.write_record([
                    &i.to_string(),
                    &r.model,
                    &num(r.metric),
                    &r.pass.to_string(),
                    "",
                ])?;
            }
            Err(e) => {
                failures += 1;
                w.write_record([&i.to_string(), "", "", "false", e])?;
            }
        }
    }
    w.flush()?;
    eprintln!("{suite:?}: {} instances, {failures} failures", rows.len());
    match (failures, suite) {
        (0, _) => Ok(()),
        (n, Suite::Dp) => Err(CliError::OracleMismatch(format!(
            "{n} DP/brute-force mismatches"
        ))),
        (n, _) => Err(CliError::Disagreement(format!(
            "{n} instances violate the property"
        ))),
    }
}
