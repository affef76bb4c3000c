//! Deterministic fixtures for the benchmarks under `benches/`.

use iniquity_core::game::{LatencyFunction, Link, ParallelNetwork};
use iniquity_core::income::QuantileFunction;
use iniquity_core::tradeoff::{DelayTable, TradeoffInstance};

/// `k` links mixing constant, affine and quadratic latencies, tolls rising
/// with link index.
pub fn network(k: usize) -> ParallelNetwork {
    let links = (0..k)
        .map(|e| {
            let latency = match e % 3 {
                0 => LatencyFunction::constant(1.0 + 0.1 * e as f64),
                1 => LatencyFunction::linear(1.0, 0.1 * e as f64),
                _ => LatencyFunction::polynomial(vec![0.2, 0.3, 0.8]),
            }
            .expect("valid latency");
            Link::new(latency, 0.15 * e as f64)
        })
        .collect();
    ParallelNetwork::new(links).expect("at least two links")
}

/// `cells` equal-mass income steps `1, 2, …`.
pub fn steps(cells: usize) -> QuantileFunction {
    QuantileFunction::piecewise((1..=cells).map(|i| i as f64).collect()).expect("increasing steps")
}

/// `k` links over `n` quantiles with `d` distinct delay levels. Link `e`
/// reaches its next delay level every `n/d` quantiles, offset by `e`.
pub fn tradeoff(k: usize, n: usize, d: u32, lambda: f64) -> TradeoffInstance {
    let q = (1..=n).map(|i| i as f64).collect();
    let links = (0..k)
        .map(|e| {
            let delays = (1..=n)
                .map(|r| (((r + e) * d as usize).div_ceil(n + k)).clamp(1, d as usize) as u32)
                .collect();
            DelayTable::new(delays)
        })
        .collect();
    TradeoffInstance::new(q, links, lambda).expect("valid instance")
}
