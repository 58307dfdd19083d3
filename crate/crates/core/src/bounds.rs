//! Explicit constants of the normal approximation bounds, the truncation
//! `d'_ij = d_ij 1(|d_ij| <= 1/2)` with its deterministic inequalities, and
//! the lattice lower-bound family.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::array::{moments, standardize, CenteredArray, ScoreArray, SymmetricArray};
use crate::distances::{kolmogorov_distance, normal_pdf, PNorm, StepCdf};
use crate::error::{Error, Result};
use crate::involution::for_each_involution;
use crate::montecarlo::sample_statistic;
use crate::numeric::sum;
#[cfg(test)]
use crate::numeric::CompensatedSum;

/// `K_1`.
pub const K_ONE: f64 = 379.0;
/// `K_∞`.
pub const K_INF: f64 = 61_702_446.0;
/// Truncation regime: `β_D / n <= EPSILON_0`.
pub const EPSILON_0: f64 = 1.0 / 90.0;
/// Truncation regime: `n >= N_0`.
pub const N_0: usize = 1000;
/// Truncation threshold.
pub const TRUNCATION_LEVEL: f64 = 0.5;
/// Largest `n` for which the collision probability is enumerated.
pub const COLLISION_CAP: usize = 12;

/// `K_p = 379^{1/p} 61702446^{1-1/p}`.
pub fn kp(p: PNorm) -> f64 {
    match p {
        PNorm::Infinity => K_INF,
        PNorm::Finite(p) => (K_ONE.ln() / p + K_INF.ln() * (1.0 - 1.0 / p)).exp(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub beta: f64,
    pub beta_over_n: f64,
    pub kp: BTreeMap<String, f64>,
    /// `K_p β / n`.
    pub bound: BTreeMap<String, f64>,
    /// `224 + 1344/n + 384/n²`.
    pub l1_refined_coefficient: f64,
    pub l1_refined: f64,
    /// `112 β/n + 672 β/n² + 192 β/n³`.
    pub gap_bound: f64,
    /// `n >= 9`.
    pub valid: bool,
    /// `n > 9`.
    pub valid_strict: bool,
}

pub fn rate_bounds(n: usize, beta: f64, ps: &[PNorm]) -> BoundReport {
    let nf = n as f64;
    let ratio = beta / nf;
    let mut kps = BTreeMap::new();
    let mut bound = BTreeMap::new();
    for &p in ps {
        let k = kp(p);
        kps.insert(p.to_string(), k);
        bound.insert(p.to_string(), k * ratio);
    }
    let coefficient = 224.0 + 1344.0 / nf + 384.0 / (nf * nf);
    BoundReport {
        n,
        beta,
        beta_over_n: ratio,
        kp: kps,
        bound,
        l1_refined_coefficient: coefficient,
        l1_refined: coefficient * ratio,
        gap_bound: 112.0 * ratio + 672.0 * ratio / nf + 192.0 * ratio / (nf * nf),
        valid: n >= 9,
        valid_strict: n > 9,
    }
}

/// Outcome of one inequality; `None` when its hypotheses do not hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: Option<bool>,
}

impl InequalityCheck {
    fn unconditional(lhs: f64, rhs: f64) -> Self {
        InequalityCheck { lhs, rhs, holds: Some(lhs <= rhs) }
    }

    fn gated(lhs: f64, rhs: f64, applicable: bool) -> Self {
        InequalityCheck { lhs, rhs, holds: applicable.then_some(lhs <= rhs) }
    }

    /// Holds or not applicable.
    pub fn ok(&self) -> bool {
        self.holds != Some(false)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationChecks {
    /// `|Γ| <= 8 β_D`.
    pub gamma_size: InequalityCheck,
    /// Worst row of `|Γ_i| <= 8 Σ_j |d_ij|³`, as `lhs - rhs`.
    pub gamma_rows: InequalityCheck,
    /// `|d'_{++}| <= 4 β_D`.
    pub total: InequalityCheck,
    /// Worst row of `|d'_{i+}| <= 4 Σ_j |d_ij|³`, as `lhs - rhs`.
    pub rows: InequalityCheck,
    /// `|μ_{D'}| <= 8 β_D / n`.
    pub mean: InequalityCheck,
    /// `|σ²_{D'} - 1| <= 10 β_D / n`, gated on the regime.
    pub variance: InequalityCheck,
    /// `β_{D'} <= 22 β_D`, gated on the regime.
    pub beta: InequalityCheck,
    /// Exact `P(π hits Γ) <= 16 β_D / n`, when enumerated.
    pub collision: Option<InequalityCheck>,
}

impl TruncationChecks {
    pub fn all_ok(&self) -> bool {
        [self.gamma_size, self.gamma_rows, self.total, self.rows, self.mean, self.variance, self.beta]
            .iter()
            .chain(self.collision.iter())
            .all(InequalityCheck::ok)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationResult {
    pub n: usize,
    pub beta: f64,
    #[serde(skip)]
    pub d_prime: SymmetricArray,
    /// Ordered pairs `(i, j)` with `|d_ij| > 1/2`, 0-based.
    pub gamma: Vec<(usize, usize)>,
    pub gamma_rows: Vec<Vec<usize>>,
    pub row_cubes: Vec<f64>,
    pub d_prime_total: f64,
    pub d_prime_rows: Vec<f64>,
    pub mu_prime: f64,
    pub sigma2_prime: f64,
    /// `None` when `D'` has zero variance.
    pub beta_prime: Option<f64>,
    pub collision_prob_bound: f64,
    /// `β_D / n <= 1/90` and `n >= 1000`.
    pub regime: bool,
    pub checks: TruncationChecks,
}

/// Fraction of `π ∈ Π_n` with some `(i, π(i)) ∈ Γ`, and the number of `π`
/// with `Y_{D'}(π) != Y_D(π)` that avoid `Γ` (always 0).
pub fn exact_collision_probability(d: &CenteredArray, d_prime: &SymmetricArray) -> Result<(f64, u64)> {
    let n = d.n();
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut unexplained = 0u64;
    for_each_involution(n, COLLISION_CAP, |m| {
        total += 1;
        let hit = (0..n).any(|i| d.get(i, m[i]).abs() > TRUNCATION_LEVEL);
        if hit {
            hits += 1;
        } else if (0..n).any(|i| d.get(i, m[i]) != d_prime.get(i, m[i])) {
            unexplained += 1;
        }
    })?;
    Ok((hits as f64 / total as f64, unexplained))
}

pub fn truncate(d: &CenteredArray) -> Result<TruncationResult> {
    let n = d.n();
    let nf = n as f64;
    let beta = d.beta();
    let keep = |x: f64| if x.abs() <= TRUNCATION_LEVEL { x } else { 0.0 };
    let d_prime = SymmetricArray::from_upper_fn(n, |i, j| keep(d.get(i, j)))?;
    let mut gamma = Vec::new();
    let mut gamma_rows = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && d.get(i, j).abs() > TRUNCATION_LEVEL {
                gamma.push((i, j));
                gamma_rows[i].push(j);
            }
        }
    }
    let row_cubes: Vec<f64> = (0..n)
        .map(|i| sum((0..n).map(|j| d.get(i, j).abs().powi(3))))
        .collect();
    let d_prime_rows = d_prime.row_sums();
    let d_prime_total = sum(d_prime_rows.iter().copied());
    let m = moments(&d_prime)?;
    let regime = beta / nf <= EPSILON_0 && n >= N_0;

    let worst_row = |lhs: &dyn Fn(usize) -> f64, factor: f64| {
        let (i, _) = (0..n)
            .map(|i| (i, lhs(i) - factor * row_cubes[i]))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        InequalityCheck::unconditional(lhs(i), factor * row_cubes[i])
    };
    let collision = if n <= COLLISION_CAP {
        let (p, unexplained) = exact_collision_probability(d, &d_prime)?;
        let mut c = InequalityCheck::unconditional(p, 16.0 * beta / nf);
        if unexplained > 0 {
            c.holds = Some(false);
        }
        Some(c)
    } else {
        None
    };
    let checks = TruncationChecks {
        gamma_size: InequalityCheck::unconditional(gamma.len() as f64, 8.0 * beta),
        gamma_rows: worst_row(&|i| gamma_rows[i].len() as f64, 8.0),
        total: InequalityCheck::unconditional(d_prime_total.abs(), 4.0 * beta),
        rows: worst_row(&|i| d_prime_rows[i].abs(), 4.0),
        mean: InequalityCheck::unconditional(m.mu.abs(), 8.0 * beta / nf),
        variance: InequalityCheck::gated((m.sigma2 - 1.0).abs(), 10.0 * beta / nf, regime),
        beta: InequalityCheck::gated(m.beta.unwrap_or(f64::INFINITY), 22.0 * beta, regime),
        collision,
    };
    Ok(TruncationResult {
        n,
        beta,
        d_prime,
        gamma,
        gamma_rows,
        row_cubes,
        d_prime_total,
        d_prime_rows,
        mu_prime: m.mu,
        sigma2_prime: m.sigma2,
        beta_prime: m.beta,
        collision_prob_bound: 16.0 * beta / nf,
        regime,
        checks,
    })
}

/// For `j > i` (1-based): `0` if `i` is odd and `j = i + 1`, `+1` if
/// `i - j` is even, `-1` otherwise.
pub fn lower_bound_array(n: usize) -> Result<SymmetricArray> {
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    SymmetricArray::from_upper_fn(n, |i0, j0| {
        let (i, j) = (i0 + 1, j0 + 1);
        if i % 2 == 1 && j == i + 1 {
            0.0
        } else if (j - i) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    })
}

/// Slack `sqrt(ln(2/δ) / (2m))` of the DKW inequality.
pub fn dkw_slack(m: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * m as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub n: usize,
    pub draws: usize,
    pub mu: f64,
    pub sigma2: f64,
    pub sigma: f64,
    pub epsilon: f64,
    /// `(1 - ε) σ^{-1} φ(σ^{-1}) / 2`.
    pub floor: f64,
    pub ks: f64,
    pub dkw_slack: f64,
    pub beta: f64,
    pub beta_over_n: f64,
    /// Every sampled `Y_E` was an even integer.
    pub lattice: bool,
    /// `ks >= floor - dkw_slack`.
    pub pass: bool,
}

pub const LOWER_BOUND_EPSILON: f64 = 0.1;
pub const LOWER_BOUND_DELTA: f64 = 0.001;

pub fn lower_bound_experiment(n: usize, m: usize, seed: u64, threads: Option<usize>) -> Result<LowerBoundReport> {
    let e = lower_bound_array(n)?;
    let mom = moments(&e)?;
    let d = standardize(&e)?;
    let sigma = mom.sigma2.sqrt();
    let y = sample_statistic(&e, m, seed, threads)?;
    let lattice = y.iter().all(|&v| v == v.round() && (v as i64) % 2 == 0);
    let w: Vec<f64> = y.iter().map(|&v| (v - mom.mu) / sigma).collect();
    let ks = kolmogorov_distance(&StepCdf::ecdf(&w)?);
    let floor = 0.5 * (1.0 - LOWER_BOUND_EPSILON) / sigma * normal_pdf(1.0 / sigma);
    let slack = dkw_slack(m, LOWER_BOUND_DELTA);
    Ok(LowerBoundReport {
        n,
        draws: m,
        mu: mom.mu,
        sigma2: mom.sigma2,
        sigma,
        epsilon: LOWER_BOUND_EPSILON,
        floor,
        ks,
        dkw_slack: slack,
        beta: d.beta(),
        beta_over_n: d.beta() / n as f64,
        lattice,
        pass: ks >= floor - slack,
    })
}

/// `n,sigma,ks,floor,beta_over_n` rows.
pub fn write_lower_bound_csv<W: std::io::Write>(rows: &[LowerBoundReport], out: W) -> Result<()> {
    use crate::io::fmt_f64;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "sigma", "ks", "floor", "beta_over_n"]).map_err(crate::io::csv_err)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            fmt_f64(r.sigma),
            fmt_f64(r.ks),
            fmt_f64(r.floor),
            fmt_f64(r.beta_over_n),
        ])
        .map_err(crate::io::csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `Σ_{i≠j} |x_ij|³` of a plain array.
#[cfg(test)]
fn cube_sum<A: ScoreArray>(a: &A) -> f64 {
    let mut acc = CompensatedSum::new();
    a.entries().iter().for_each(|x| acc.add(x.abs().powi(3)));
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::random_centered;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kp_values() {
        assert_eq!(kp(PNorm::Infinity), K_INF);
        assert!((kp(PNorm::Finite(1.0)) - 379.0).abs() < 1e-9);
        let two = (379.0f64 * 61_702_446.0).sqrt();
        assert!((kp(PNorm::Finite(2.0)) - two).abs() / two < 1e-12);
        assert!((two - 1.5292e5).abs() < 10.0);
        for p in [1.0, 1.5, 2.0, 4.0, 10.0] {
            let lhs = kp(PNorm::Finite(p)).ln();
            let rhs = K_ONE.ln() / p + (1.0 - 1.0 / p) * K_INF.ln();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_report_fields() {
        let ps = [PNorm::Finite(1.0), PNorm::Infinity];
        assert!(!rate_bounds(8, 1.0, &ps).valid);
        let r9 = rate_bounds(9, 1.0, &ps);
        assert!(r9.valid && !r9.valid_strict);
        assert!((r9.l1_refined_coefficient - 378.074).abs() < 1e-3);
        assert!(r9.l1_refined_coefficient <= 379.0);
        let r = rate_bounds(20, 3.0, &ps);
        let r2 = rate_bounds(20, 6.0, &ps);
        assert!((r2.gap_bound - 2.0 * r.gap_bound).abs() < 1e-12);
        assert!((r2.bound["inf"] - 2.0 * r.bound["inf"]).abs() < 1e-6);
    }

    #[test]
    fn sign_array_rows() {
        let e = lower_bound_array(4).unwrap();
        assert_eq!(
            e.to_rows(),
            vec![
                vec![0.0, 0.0, 1.0, -1.0],
                vec![0.0, 0.0, -1.0, 1.0],
                vec![1.0, -1.0, 0.0, 0.0],
                vec![-1.0, 1.0, 0.0, 0.0],
            ]
        );
        for n in (4..=200).step_by(2) {
            let e = lower_bound_array(n).unwrap();
            assert!(e.row_sums().iter().all(|&s| s == 0.0), "n = {n}");
            assert!(e.entries().iter().all(|&x| x == 0.0 || x.abs() == 1.0));
        }
        assert!(matches!(lower_bound_array(5), Err(Error::OddDimension(5))));
    }

    #[test]
    fn truncation_no_large_entries() {
        let d = random_centered(40, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(d.max_abs() <= 0.5);
        let t = truncate(&d).unwrap();
        assert!(t.gamma.is_empty());
        assert_eq!(t.d_prime.entries(), d.array().entries());
        assert!((t.collision_prob_bound - 16.0 * d.beta() / 40.0).abs() < 1e-15);
        assert!(t.checks.all_ok());
    }

    #[test]
    fn truncation_single_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_centered(10, &mut rng).unwrap();
        let t = truncate(&d).unwrap();
        for &(i, j) in &t.gamma {
            assert!(d.get(i, j).abs() > 0.5);
            assert_eq!(t.d_prime.get(i, j), 0.0);
            assert!(t.gamma.contains(&(j, i)));
        }
        assert!(t.checks.all_ok(), "{:?}", t.checks);
        assert!(t.checks.collision.is_some());
        assert!(t.checks.variance.holds.is_none());
        assert!((cube_sum(d.array()) - d.beta()).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_small() {
        let r = lower_bound_experiment(20, 20_000, 5, None).unwrap();
        assert!(r.lattice);
        assert!(r.pass, "{r:?}");
        assert_eq!(r.mu, 0.0);
    }
}
