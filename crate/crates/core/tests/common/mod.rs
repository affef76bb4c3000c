//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use iniquity_core::game::{LatencyFunction, Link, ParallelNetwork};
use iniquity_core::income::QuantileFunction;
use iniquity_core::tradeoff::{DelayTable, TradeoffInstance};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Constant, affine or polynomial latency with nonnegative coefficients.
pub fn latency(rng: &mut ChaCha8Rng) -> LatencyFunction {
    match rng.gen_range(0..3) {
        0 => LatencyFunction::constant(rng.gen_range(0.2..2.0)).unwrap(),
        1 => LatencyFunction::linear(rng.gen_range(0.1..3.0), rng.gen_range(0.0..1.0)).unwrap(),
        _ => {
            let degree = rng.gen_range(1..=4);
            let mut coeffs: Vec<f64> = (0..=degree).map(|_| rng.gen_range(0.0..1.5)).collect();
            coeffs[degree] += 0.1;
            LatencyFunction::polynomial(coeffs).unwrap()
        }
    }
}

/// A network of `k` links with at least one positive toll.
pub fn network(rng: &mut ChaCha8Rng, k: usize) -> ParallelNetwork {
    let mut tolls: Vec<f64> = (0..k)
        .map(|_| {
            if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(0.01..0.8)
            }
        })
        .collect();
    if tolls.iter().all(|t| *t == 0.0) {
        let e = rng.gen_range(0..k);
        tolls[e] = rng.gen_range(0.05..0.8);
    }
    ParallelNetwork::new(
        tolls
            .into_iter()
            .map(|t| Link::new(latency(rng), t))
            .collect(),
    )
    .unwrap()
}

/// Power-law or equal-mass step income. With `positive` the poorest type
/// earns a strictly positive amount.
pub fn income(rng: &mut ChaCha8Rng, positive: bool) -> QuantileFunction {
    if rng.gen_bool(0.5) {
        let beta = rng.gen_range(0.0..4.0);
        let scale = rng.gen_range(0.5..3.0);
        let floor = if positive || rng.gen_bool(0.5) {
            rng.gen_range(0.05..1.0)
        } else {
            0.0
        };
        QuantileFunction::power_law_with_floor(beta, scale, floor).unwrap()
    } else {
        let cells = rng.gen_range(1..=12);
        let mut values: Vec<f64> = (0..cells).map(|_| rng.gen_range(0.1..5.0)).collect();
        values.sort_by(f64::total_cmp);
        QuantileFunction::piecewise(values).unwrap()
    }
}

/// Integer quantiles in `1..=20` and nondecreasing integer delays in `1..=d`.
pub fn tradeoff(rng: &mut ChaCha8Rng, k: usize, n: usize, d: u32, lambda: f64) -> TradeoffInstance {
    let mut q: Vec<f64> = (0..n)
        .map(|_| f64::from(rng.gen_range(1u32..=20)))
        .collect();
    q.sort_by(f64::total_cmp);
    let links = (0..k)
        .map(|_| {
            let mut delays: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=d)).collect();
            delays.sort_unstable();
            DelayTable::new(delays)
        })
        .collect();
    TradeoffInstance::new(q, links, lambda).unwrap()
}

pub fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    items.choose(rng).unwrap()
}
