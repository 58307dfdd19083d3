//! Suite of exact and Monte Carlo checks on randomly generated arrays.

use rand::SeedableRng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::array::{moments, random_centered, random_symmetric, CenteredArray, ScoreArray};
use crate::bounds::{kp, rate_bounds, truncate};
use crate::coupling::{
    case_table_sweep, exact_gap, exact_pi_dagger_marginal, exact_zero_bias_moments,
    exact_zero_bias_moments_coupled, index_image_laws, stein_pair_exact, QuadrupleTable,
    EXACT_COUPLING_CAP, TABLE_CAP,
};
use crate::distances::{kolmogorov_distance, l1_distance, lp_direct, PNorm, StepCdf};
use crate::error::{Error, Result};
use crate::involution::{
    count_involutions, enumerate_involutions, exact_w_distribution, sample_into, ENUMERATION_CAP,
};
use crate::stream::{derive_seed, run_chunked, StreamRng};

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub n: usize,
    pub max_abs_error: f64,
    pub pass: bool,
}

impl CheckRecord {
    fn new(check: &str, n: usize, max_abs_error: f64, pass: bool) -> Self {
        CheckRecord { check: check.to_string(), n, max_abs_error, pass }
    }
}

/// Names accepted by [`run_suite`]'s filter, in execution order.
pub const CHECKS: &[&str] = &[
    "moments_bruteforce",
    "lemma_3_3_normalization",
    "stein_pair_linearity",
    "stein_pair_second_moment",
    "stein_pair_exchangeability",
    "zero_bias_moments",
    "pi_dagger_uniformity",
    "index_image_laws",
    "case_table",
    "impossible_cases_21_12",
    "bound_chain",
    "truncation",
    "sampler_uniformity",
];

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    /// Draws for the sampler chi-square test.
    pub sampler_draws: usize,
    /// Largest `n` for the exact bound chain.
    pub chain_max_n: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: crate::stream::DEFAULT_SEED, threads: None, sampler_draws: 1_000_000, chain_max_n: 12 }
    }
}

fn arrays(seed: u64, tag: u64, n: usize, count: usize) -> Result<Vec<CenteredArray>> {
    let mut rng = StreamRng::seed_from_u64(derive_seed(seed, tag * 1000 + n as u64));
    (0..count).map(|_| random_centered(n, &mut rng)).collect()
}

fn worst(records: impl IntoIterator<Item = (f64, bool)>) -> (f64, bool) {
    records
        .into_iter()
        .fold((0.0f64, true), |(e, p), (e2, p2)| (e.max(e2), p && p2))
}

/// Runs every check, or only `only` when given.
pub fn run_suite(config: &SuiteConfig, only: Option<&str>) -> Result<Vec<CheckRecord>> {
    if let Some(name) = only {
        if !CHECKS.contains(&name) {
            return Err(Error::Parse(format!("unknown check {name:?}; expected one of {}", CHECKS.join(", "))));
        }
    }
    let mut out = Vec::new();
    for (tag, &name) in CHECKS.iter().enumerate() {
        if only.is_some_and(|o| o != name) {
            continue;
        }
        out.extend(run_check(name, tag as u64 + 1, config)?);
    }
    Ok(out)
}

fn run_check(name: &str, tag: u64, cfg: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let seed = cfg.seed;
    let mut out = Vec::new();
    match name {
        "moments_bruteforce" => {
            let mut rng = StreamRng::seed_from_u64(derive_seed(seed, tag));
            for n in [4, 6, 8, 10] {
                let e = random_symmetric(n, &mut rng)?;
                let m = moments(&e)?;
                let mut values = Vec::new();
                crate::involution::for_each_involution(n, ENUMERATION_CAP, |map| {
                    values.push(crate::involution::y_of_map(&e, map))
                })?;
                let law = crate::involution::ExactDistribution::from_equally_likely(values)?;
                let err = ((law.mean() - m.mu).abs() / m.mu.abs().max(1.0))
                    .max((law.variance() - m.sigma2).abs() / m.sigma2.max(1e-300));
                out.push(CheckRecord::new(name, n, err, err < 1e-9));
            }
        }
        "lemma_3_3_normalization" => {
            for n in [6, 8, 10, 12] {
                let (err, pass) = worst(arrays(seed, tag, n, 5)?.iter().map(|d| {
                    let err = QuadrupleTable::build(d, TABLE_CAP).map(|t| (t.normalization() - 1.0).abs());
                    let err = err.unwrap_or(f64::INFINITY);
                    (err, err < 1e-10)
                }));
                out.push(CheckRecord::new(name, n, err, pass));
            }
        }
        "stein_pair_linearity" | "stein_pair_second_moment" => {
            for n in [6, 8, 10] {
                let d = &arrays(seed, tag, n, 1)?[0];
                let r = stein_pair_exact(d, EXACT_COUPLING_CAP)?;
                let err = if name == "stein_pair_linearity" {
                    r.linearity_max_error
                } else {
                    (r.second_moment - 8.0 / n as f64).abs()
                };
                out.push(CheckRecord::new(name, n, err, err < 1e-12));
            }
        }
        "stein_pair_exchangeability" => {
            for n in [6, 8] {
                let d = &arrays(seed, tag, n, 1)?[0];
                let mismatches = stein_pair_exact(d, EXACT_COUPLING_CAP)?.exchangeability_mismatches;
                let m = mismatches.map_or(f64::INFINITY, |m| m as f64);
                out.push(CheckRecord::new(name, n, m, m == 0.0));
            }
        }
        "zero_bias_moments" => {
            for n in [6, 8] {
                let mut checks = Vec::new();
                for d in arrays(seed, tag, n, 3)? {
                    for c in exact_zero_bias_moments(&d, 5, 8)?
                        .into_iter()
                        .chain(exact_zero_bias_moments_coupled(&d, 5, 8)?)
                    {
                        checks.push((c.abs_error(), c.abs_error() < 1e-8));
                    }
                }
                let (err, pass) = worst(checks);
                out.push(CheckRecord::new(name, n, err, pass));
            }
        }
        "pi_dagger_uniformity" => {
            for n in [6, 8] {
                let d = &arrays(seed, tag, n, 1)?[0];
                let r = exact_pi_dagger_marginal(d, 8)?;
                let pass = r.support_failures == 0
                    && r.min_count == r.expected_count
                    && r.max_count == r.expected_count;
                out.push(CheckRecord::new(name, n, r.max_abs_error, pass));
            }
        }
        "index_image_laws" => {
            for n in [6, 8] {
                let d = &arrays(seed, tag, n, 1)?[0];
                let r = index_image_laws(d, 8)?;
                let err = r.p2_max_abs_error.max(r.p3_max_abs_error).max((r.p2_total - 1.0).abs());
                let pass = r.structural_violations == 0 && err < 1e-12;
                out.push(CheckRecord::new(name, n, err, pass));
            }
        }
        "case_table" | "impossible_cases_21_12" => {
            for n in [6, 8] {
                let r = case_table_sweep(n, 8)?;
                let bad = if name == "case_table" {
                    r.ambiguous + r.construction_failures + r.complement_failures
                } else {
                    r.forbidden_overlaps
                };
                out.push(CheckRecord::new(name, n, bad as f64, bad == 0));
            }
        }
        "bound_chain" => {
            for n in (10..=cfg.chain_max_n).step_by(2) {
                let d = &arrays(seed, tag, n, 1)?[0];
                out.push(bound_chain(d)?);
            }
        }
        "truncation" => {
            for n in [10, 12, 16, 100] {
                let (mut err, mut pass) = (0.0f64, true);
                for d in arrays(seed, tag, n, 3)? {
                    let t = truncate(&d)?;
                    pass &= t.checks.all_ok();
                    if let Some(c) = t.checks.collision {
                        err = err.max((c.lhs - c.rhs).max(0.0));
                    }
                }
                out.push(CheckRecord::new(name, n, err, pass));
            }
        }
        "sampler_uniformity" => {
            let (stat, quantile, identical) = sampler_chi_square(8, cfg.sampler_draws, derive_seed(seed, tag), cfg.threads)?;
            out.push(CheckRecord::new(name, 8, stat, stat < quantile && identical));
        }
        _ => unreachable!("filtered by run_suite"),
    }
    Ok(out)
}

/// `||F_W - Φ||_1 <= 2 E|W - W*| <= 2 gap_bound` and
/// `||F_W - Φ||_p <= K_p β / n` for `p = 1, 2, ∞`. The error field is the
/// largest violation (0 when all hold).
pub fn bound_chain(d: &CenteredArray) -> Result<CheckRecord> {
    let n = d.n();
    let f = StepCdf::from_exact(&exact_w_distribution(d, ENUMERATION_CAP)?);
    let l1 = l1_distance(&f);
    let linf = kolmogorov_distance(&f);
    let l2 = lp_direct(&f, PNorm::Finite(2.0));
    let gap = exact_gap(d, EXACT_COUPLING_CAP)?;
    let b = rate_bounds(n, d.beta(), &[]);
    let ratio = d.beta() / n as f64;
    let pairs = [
        (l1, 2.0 * gap),
        (2.0 * gap, 2.0 * b.gap_bound),
        (l1, kp(PNorm::Finite(1.0)) * ratio),
        (l2, kp(PNorm::Finite(2.0)) * ratio),
        (linf, kp(PNorm::Infinity) * ratio),
    ];
    let violation = pairs.iter().map(|(a, b)| (a - b).max(0.0)).fold(0.0, f64::max);
    Ok(CheckRecord::new("bound_chain", n, violation, pairs.iter().all(|(a, b)| a <= b)))
}

/// Chi-square statistic of `m` sampled involutions over the `|Π_n|` cells,
/// the 0.999 quantile of its reference law, and whether one and four
/// worker threads produced the same draws.
pub fn sampler_chi_square(n: usize, m: usize, seed: u64, threads: Option<usize>) -> Result<(f64, f64, bool)> {
    let cells = enumerate_involutions(n, ENUMERATION_CAP)?;
    let index: std::collections::HashMap<Vec<usize>, usize> =
        cells.iter().enumerate().map(|(k, p)| (p.as_slice().to_vec(), k)).collect();
    let draw = |threads| {
        run_chunked(seed, m, threads, |rng, count| {
            let mut map = vec![0; n];
            let mut pool = Vec::with_capacity(n);
            (0..count)
                .map(|_| {
                    sample_into(&mut map, &mut pool, rng);
                    index[&map]
                })
                .collect()
        })
    };
    let a: Vec<usize> = draw(threads)?;
    let b: Vec<usize> = draw(Some(if threads == Some(4) { 1 } else { 4 }))?;
    let mut counts = vec![0u64; cells.len()];
    a.iter().for_each(|&k| counts[k] += 1);
    let expected = m as f64 / count_involutions(n)? as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = (cells.len() - 1) as f64;
    let quantile = ChiSquared::new(dof)
        .map_err(|e| Error::Parse(e.to_string()))?
        .inverse_cdf(0.999);
    Ok((stat, quantile, a == b))
}
