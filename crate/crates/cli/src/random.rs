//! Seeded instance generators for the check suites.

use iniquity_core::game::{LatencyFunction, Link, ParallelNetwork};
use iniquity_core::income::QuantileFunction;
use iniquity_core::tradeoff::{DelayTable, TradeoffInstance};
use iniquity_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream `i` of the generator seeded with `seed`, independent of evaluation order.
pub fn rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

fn latency(rng: &mut ChaCha8Rng) -> Result<LatencyFunction> {
    match rng.gen_range(0..3) {
        0 => LatencyFunction::constant(rng.gen_range(0.2..2.0)),
        1 => LatencyFunction::linear(rng.gen_range(0.1..3.0), rng.gen_range(0.0..1.0)),
        _ => {
            let degree = rng.gen_range(1..=4);
            let mut coeffs: Vec<f64> = (0..=degree).map(|_| rng.gen_range(0.0..1.5)).collect();
            coeffs[degree] += 0.1;
            LatencyFunction::polynomial(coeffs)
        }
    }
}

/// Two to four links, at least one tolled.
pub fn network(rng: &mut ChaCha8Rng) -> Result<ParallelNetwork> {
    let k = rng.gen_range(2..=4);
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
        tolls[rng.gen_range(0..k)] = rng.gen_range(0.05..0.8);
    }
    let links = tolls
        .into_iter()
        .map(|t| Ok(Link::new(latency(rng)?, t)))
        .collect::<Result<_>>()?;
    ParallelNetwork::new(links)
}

/// Power law (optionally floored) or equal-mass steps.
pub fn income(rng: &mut ChaCha8Rng, positive: bool) -> Result<QuantileFunction> {
    if rng.gen_bool(0.5) {
        let beta = rng.gen_range(0.0..4.0);
        let scale = rng.gen_range(0.5..3.0);
        let floor = if positive || rng.gen_bool(0.5) {
            rng.gen_range(0.05..1.0)
        } else {
            0.0
        };
        QuantileFunction::power_law_with_floor(beta, scale, floor)
    } else {
        let mut values: Vec<f64> = (0..rng.gen_range(1..=12))
            .map(|_| rng.gen_range(0.1..5.0))
            .collect();
        values.sort_by(f64::total_cmp);
        QuantileFunction::piecewise(values)
    }
}

/// Up to 3 links, 8 quantiles and 4 delay levels.
pub fn tradeoff(rng: &mut ChaCha8Rng) -> Result<TradeoffInstance> {
    let k = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=8);
    let d = rng.gen_range(1..=4u32);
    let lambda = [0.0, 1.0, 10.0][rng.gen_range(0..3)];
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
    TradeoffInstance::new(q, links, lambda)
}

/// A random mixed strategy per level.
pub fn strategies(rng: &mut ChaCha8Rng, levels: usize, paths: usize) -> Vec<Vec<f64>> {
    (0..levels)
        .map(|_| {
            let w: Vec<f64> = (0..paths).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        })
        .collect()
}
