//! Sweep points simulated concurrently on disjoint random streams.

use postsel_core::estimation::{simulate_sweep_point, SweepPoint, SweepSampling};
use postsel_core::sampler::RngSpec;
use postsel_core::{Observable, Result, SpinState};
use rayon::prelude::*;

/// Outcome of a parallel sweep, in sweep order.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRun {
    pub points: Vec<SweepPoint>,
    /// Δ values that produced too few retained events to keep.
    pub dropped: Vec<f64>,
}

/// Point `i` draws from stream `rng.stream + i`, so the result does not
/// depend on the number of worker threads.
#[allow(clippy::too_many_arguments)]
pub fn simulate_sweep_parallel(
    pre: &SpinState,
    epsilon: f64,
    deltas: &[f64],
    eta: f64,
    observable: Observable,
    n: usize,
    rng: RngSpec,
    sampling: SweepSampling,
) -> Result<SweepRun> {
    let results: Vec<Result<Option<SweepPoint>>> = deltas
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| {
            let spec = RngSpec::new(rng.seed, rng.stream + i as u64);
            simulate_sweep_point(pre, epsilon, delta, eta, observable, n, spec, sampling)
        })
        .collect();
    let mut run = SweepRun { points: Vec::with_capacity(deltas.len()), dropped: Vec::new() };
    for (delta, r) in deltas.iter().zip(results) {
        match r? {
            Some(p) => run.points.push(p),
            None => run.dropped.push(*delta),
        }
    }
    Ok(run)
}
