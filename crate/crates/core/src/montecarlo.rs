//! Monte Carlo estimates of the law of `W` and of the coupling gap for
//! arrays beyond exhaustive enumeration.

use serde::Serialize;

use crate::array::{CenteredArray, ScoreArray};
use crate::bounds::rate_bounds;
use crate::coupling::{estimate_gap, QuadSampler};
use crate::distances::{kolmogorov_distance, l1_distance, PNorm, StepCdf};
use crate::error::Result;
use crate::involution::{sample_into, y_of_map};
use crate::stream::{derive_seed, run_chunked};

/// Tag mixed into the master seed for the `W` sample stream.
pub const W_STREAM_TAG: u64 = 1;
/// Tag mixed into the master seed for the coupling stream.
pub const GAP_STREAM_TAG: u64 = 2;

/// `m` independent values of `Y_E(π)` for uniform `π`, in stream order.
pub fn sample_statistic<A: ScoreArray + Sync>(
    e: &A,
    m: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<f64>> {
    let n = e.n();
    run_chunked(seed, m, threads, |rng, count| {
        let mut map = vec![0; n];
        let mut pool = Vec::with_capacity(n);
        (0..count)
            .map(|_| {
                sample_into(&mut map, &mut pool, rng);
                y_of_map(e, &map)
            })
            .collect()
    })
}

/// One row of a simulation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationRow {
    pub n: usize,
    pub beta: f64,
    pub ks_mc: f64,
    pub l1_mc: f64,
    pub gap_mc: f64,
    pub gap_stderr: f64,
    pub bound_linf: f64,
    pub bound_l1: f64,
    pub gap_bound: f64,
}

pub fn simulate(
    d: &CenteredArray,
    m: usize,
    seed: u64,
    threads: Option<usize>,
    table_cap: usize,
) -> Result<SimulationRow> {
    let w = sample_statistic(d, m, derive_seed(seed, W_STREAM_TAG), threads)?;
    let f = StepCdf::ecdf(&w)?;
    let sampler = QuadSampler::new(d, table_cap)?;
    let gap = estimate_gap(d, &sampler, m, derive_seed(seed, GAP_STREAM_TAG), threads)?;
    let b = rate_bounds(d.n(), d.beta(), &[PNorm::Finite(1.0), PNorm::Infinity]);
    Ok(SimulationRow {
        n: d.n(),
        beta: d.beta(),
        ks_mc: kolmogorov_distance(&f),
        l1_mc: l1_distance(&f),
        gap_mc: gap.mean,
        gap_stderr: gap.stderr,
        bound_linf: b.bound["inf"],
        bound_l1: b.bound["1"],
        gap_bound: b.gap_bound,
    })
}
