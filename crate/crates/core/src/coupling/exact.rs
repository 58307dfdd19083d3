//! Exhaustive oracles over `Π_n` (and the support of the square-bias law)
//! for the exchangeable pair and the zero-bias coupling.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::dagger::{dagger_chain, local_terms, mean_abs_linear, IndexSet};
use super::square_bias::{for_each_distinct_quadruple, square_term};
use super::{stein_difference, Quadruple};
use crate::array::{CenteredArray, ScoreArray};
use crate::error::{Error, Result};
use crate::involution::{
    count_involutions, enumerate_involutions, exact_w_distribution,
    for_each_completion, y_of_map, Involution,
};
use crate::numeric::CompensatedSum;

/// Default largest `n` for the exhaustive coupling sweeps.
pub const EXACT_COUPLING_CAP: usize = 12;

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    Ok(())
}

/// Positive-weight quadruples with their normalized square-bias weights,
/// in lexicographic order.
fn weighted_quadruples(d: &CenteredArray) -> Vec<(Quadruple, f64)> {
    let mut raw = Vec::new();
    let mut total = CompensatedSum::new();
    for_each_distinct_quadruple(d.n(), |q| {
        let w = square_term(d, q);
        if w > 0.0 {
            raw.push((q, w));
            total.add(w);
        }
    });
    let total = total.value();
    raw.into_iter().map(|(q, w)| (q, w / total)).collect()
}

fn pack(map: &[usize]) -> u64 {
    map.iter().fold(0, |acc, &x| (acc << 4) | x as u64)
}

/// Exact laws of the exchangeable pair `(W, W')`.
#[derive(Debug, Clone, Serialize)]
pub struct SteinPairReport {
    pub n: usize,
    /// `max_π |avg_{I≠J}(W - W') - (4/n) W|`.
    pub linearity_max_error: f64,
    /// `E(W - W')^2` over `Π_n` × ordered pairs.
    pub second_moment: f64,
    /// Atom pairs `(a, b)` whose count differs from that of `(b, a)`; `None`
    /// when the joint table was not built (`n > 8`).
    pub exchangeability_mismatches: Option<usize>,
}

pub fn stein_pair_exact(d: &CenteredArray, cap: usize) -> Result<SteinPairReport> {
    let n = d.n();
    check_cap(n, cap)?;
    let pis = enumerate_involutions(n, cap)?;
    let pairs = (n * (n - 1)) as f64;
    let lambda = 4.0 / n as f64;
    let joint = if n <= 8 { Some(exact_w_distribution(d, cap)?) } else { None };
    let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
    let mut lost = 0usize;
    let mut linearity = 0.0f64;
    let mut second = CompensatedSum::new();
    for pi in &pis {
        let map = pi.as_slice();
        let w = y_of_map(d, map);
        let mut diff_sum = CompensatedSum::new();
        let mut sq_sum = CompensatedSum::new();
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let diff = stein_difference(d, map, i, j);
                diff_sum.add(diff);
                sq_sum.add(diff * diff);
                if let Some(law) = &joint {
                    match (law.atom_index(w), law.atom_index(w - diff)) {
                        (Some(a), Some(b)) => *counts.entry((a, b)).or_default() += 1,
                        _ => lost += 1,
                    }
                }
            }
        }
        linearity = linearity.max((diff_sum.value() / pairs - lambda * w).abs());
        second.add(sq_sum.value() / pairs);
    }
    let exchangeability_mismatches = joint.map(|_| {
        lost + counts
            .iter()
            .filter(|(&(a, b), &c)| counts.get(&(b, a)).copied().unwrap_or(0) != c)
            .count()
    });
    Ok(SteinPairReport {
        n,
        linearity_max_error: linearity,
        second_moment: second.value() / pis.len() as f64,
        exchangeability_mismatches,
    })
}

/// Conditional law of `π†` given the quadruple, with `π` uniform.
#[derive(Debug, Clone, Serialize)]
pub struct DaggerMarginalReport {
    pub n: usize,
    pub quadruples: usize,
    /// `|Π_n| / |Π_{n-4}|`.
    pub expected_count: u64,
    pub min_count: u64,
    pub max_count: u64,
    /// Quadruples whose image set is not exactly the `|Π_{n-4}|`
    /// involutions carrying the cycles `(I,K), (J,L)`.
    pub support_failures: usize,
    /// Largest `|count / |Π_n| - 1 / |Π_{n-4}||`.
    pub max_abs_error: f64,
}

pub fn exact_pi_dagger_marginal(d: &CenteredArray, cap: usize) -> Result<DaggerMarginalReport> {
    let n = d.n();
    check_cap(n, cap)?;
    if n < 6 {
        return Err(Error::DimensionTooSmall { n, min: 6 });
    }
    let pis = enumerate_involutions(n, cap)?;
    let total = pis.len() as u64;
    let admissible = count_involutions(n - 4)?;
    let expected = total / admissible;
    let mut report = DaggerMarginalReport {
        n,
        quadruples: 0,
        expected_count: expected,
        min_count: u64::MAX,
        max_count: 0,
        support_failures: 0,
        max_abs_error: 0.0,
    };
    let mut counts: HashMap<u64, u64> = HashMap::new();
    let mut image = vec![0; n];
    for (q, _) in weighted_quadruples(d) {
        counts.clear();
        let mut bad = false;
        for pi in &pis {
            let (_, chain) = dagger_chain(pi.as_slice(), q)?;
            for (x, slot) in image.iter_mut().enumerate() {
                *slot = chain.image(pi.as_slice(), x);
            }
            if Involution::from_map(image.clone()).is_err() || image[q.i] != q.k || image[q.j] != q.l {
                bad = true;
            }
            *counts.entry(pack(&image)).or_default() += 1;
        }
        if bad || counts.len() as u64 != admissible {
            report.support_failures += 1;
        }
        for &c in counts.values() {
            report.min_count = report.min_count.min(c);
            report.max_count = report.max_count.max(c);
            let err = (c as f64 / total as f64 - 1.0 / admissible as f64).abs();
            report.max_abs_error = report.max_abs_error.max(err);
        }
        report.quadruples += 1;
    }
    Ok(report)
}

/// Joint laws of the quadruple with `π(I), π(J)` and with `π(I), π(J), π(L)`.
#[derive(Debug, Clone, Serialize)]
pub struct IndexImageReport {
    pub n: usize,
    /// Largest deviation between the enumerated `P(quad, π(I)=s, π(J)=t)`
    /// and the closed form, over all cells.
    pub p2_max_abs_error: f64,
    /// Same for `P(quad, π(I)=K, π(J)=t, π(L)=r)` on six distinct indices.
    pub p3_max_abs_error: f64,
    /// Observed configurations outside the closed-form support.
    pub structural_violations: u64,
    pub p2_total: f64,
}

fn p2_closed_form(n: usize, q: Quadruple, s: usize, t: usize, p: f64) -> f64 {
    let nf = n as f64;
    if s == q.j && t == q.i {
        p / (nf - 1.0)
    } else if s == q.j || t == q.i || s == q.i || t == q.j || s == t {
        0.0
    } else {
        p / ((nf - 1.0) * (nf - 3.0))
    }
}

pub fn index_image_laws(d: &CenteredArray, cap: usize) -> Result<IndexImageReport> {
    let n = d.n();
    check_cap(n, cap)?;
    if n < 6 {
        return Err(Error::DimensionTooSmall { n, min: 6 });
    }
    let pis = enumerate_involutions(n, cap)?;
    let total = pis.len() as f64;
    let nf = n as f64;
    let p3_unit = 1.0 / ((nf - 1.0) * (nf - 3.0) * (nf - 5.0));
    let mut report = IndexImageReport {
        n,
        p2_max_abs_error: 0.0,
        p3_max_abs_error: 0.0,
        structural_violations: 0,
        p2_total: 0.0,
    };
    let mut p2_sum = CompensatedSum::new();
    let mut c2 = vec![0u64; n * n];
    let mut c3 = vec![0u64; n * n];
    for (q, p) in weighted_quadruples(d) {
        c2.iter_mut().for_each(|c| *c = 0);
        c3.iter_mut().for_each(|c| *c = 0);
        for pi in &pis {
            let (s, t, r) = (pi.image(q.i), pi.image(q.j), pi.image(q.l));
            c2[s * n + t] += 1;
            if s != q.k {
                continue;
            }
            let six = [q.i, q.j, q.k, q.l, r, t];
            let distinct = (0..6).all(|a| (a + 1..6).all(|b| six[a] != six[b]));
            if distinct {
                c3[t * n + r] += 1;
            } else if r == q.l || r == q.k || r == q.i || r == t || (r == q.j) != (t == q.l) {
                report.structural_violations += 1;
            }
        }
        for s in 0..n {
            for t in 0..n {
                let observed = p * c2[s * n + t] as f64 / total;
                let expected = p2_closed_form(n, q, s, t, p);
                if expected == 0.0 && c2[s * n + t] > 0 {
                    report.structural_violations += 1;
                }
                p2_sum.add(observed);
                report.p2_max_abs_error = report.p2_max_abs_error.max((observed - expected).abs());
                let six = [q.i, q.j, q.k, q.l, s, t];
                // s plays r here: cells (t, r) with {i,j,k,l,t,r} distinct
                if (0..6).all(|a| (a + 1..6).all(|b| six[a] != six[b])) {
                    let observed = p * c3[s * n + t] as f64 / total;
                    let err = (observed - p * p3_unit).abs();
                    report.p3_max_abs_error = report.p3_max_abs_error.max(err);
                }
            }
        }
    }
    report.p2_total = p2_sum.value();
    Ok(report)
}

/// Soundness of the ten-row table over every `(π, quadruple)` pair.
#[derive(Debug, Clone, Serialize)]
pub struct CaseSweepReport {
    pub n: usize,
    pub pairs: u64,
    /// Pairs matching zero rows or more than one row.
    pub ambiguous: u64,
    /// Occurrences of `(R1, R2) ∈ {(2,1), (1,2)}`.
    pub forbidden_overlaps: u64,
    /// `π†` or `π‡` failing the involution or cycle checks.
    pub construction_failures: u64,
    /// `π†` or `π‡` differing from `π` outside `ℐ`.
    pub complement_failures: u64,
    /// Pairs per row 1..=10.
    pub occupancy: [u64; 10],
}

pub fn case_table_sweep(n: usize, cap: usize) -> Result<CaseSweepReport> {
    check_cap(n, cap)?;
    if n < 4 {
        return Err(Error::DimensionTooSmall { n, min: 4 });
    }
    let pis = enumerate_involutions(n, cap)?;
    let mut report = CaseSweepReport {
        n,
        pairs: 0,
        ambiguous: 0,
        forbidden_overlaps: 0,
        construction_failures: 0,
        complement_failures: 0,
        occupancy: [0; 10],
    };
    for pi in &pis {
        let map = pi.as_slice();
        for_each_distinct_quadruple(n, |q| {
            report.pairs += 1;
            if super::dagger::matching_cases(map, q).count_ones() != 1 {
                report.ambiguous += 1;
            }
            let Ok((class, chain)) = dagger_chain(map, q) else {
                report.construction_failures += 1;
                return;
            };
            if matches!((class.r1, class.r2), (2, 1) | (1, 2)) {
                report.forbidden_overlaps += 1;
            }
            report.occupancy[class.case_id as usize - 1] += 1;
            let dagger = pi.compose_transpositions(chain.as_slice());
            let ddagger = dagger.as_ref().ok().map(|p| super::alpha_compose(p, q.i, q.j));
            match (dagger, ddagger) {
                (Ok(dg), Some(Ok(ddg))) => {
                    if !dg.has_cycle(q.i, q.k)
                        || !dg.has_cycle(q.j, q.l)
                        || !ddg.has_cycle(q.i, q.j)
                        || !ddg.has_cycle(q.k, q.l)
                    {
                        report.construction_failures += 1;
                    }
                    let set = IndexSet::new(map, q);
                    let outside_differs = (0..n).any(|x| {
                        !set.as_slice().contains(&x)
                            && (dg.image(x) != map[x] || ddg.image(x) != map[x])
                    });
                    if outside_differs {
                        report.complement_failures += 1;
                    }
                }
                _ => report.construction_failures += 1,
            }
        });
    }
    Ok(report)
}

/// `E[W f(W)]` against `E f'(W*)` for `f(w) = w^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub k: u32,
    /// `E[W^{k+1}]`.
    pub lhs: f64,
    /// `k E[(W*)^{k-1}]`.
    pub rhs: f64,
}

impl MomentCheck {
    pub fn abs_error(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// `∫_0^1 (u a + (1-u) b)^m du`, written as a sum to stay stable when
/// `a ≈ b`.
fn segment_power_mean(a: f64, b: f64, m: u32) -> f64 {
    let mut acc = 0.0;
    for r in 0..=m {
        acc += a.powi(r as i32) * b.powi((m - r) as i32);
    }
    acc / (m + 1) as f64
}

fn lhs_moments(d: &CenteredArray, k_max: u32, cap: usize) -> Result<Vec<f64>> {
    let law = exact_w_distribution(d, cap)?;
    Ok((1..=k_max).map(|k| law.moment(k as i32 + 1)).collect())
}

fn assemble_checks(lhs: Vec<f64>, mut acc: Vec<CompensatedSum>) -> Vec<MomentCheck> {
    lhs.into_iter()
        .zip(acc.iter_mut())
        .enumerate()
        .map(|(idx, (lhs, s))| {
            let k = idx as u32 + 1;
            MomentCheck { k, lhs, rhs: k as f64 * s.value() }
        })
        .collect()
}

/// Zero-bias moment identities where `W*` is built from the law of the
/// quadruple and a uniform involution carrying the cycles `(I,K), (J,L)`
/// on the remaining `n - 4` points; independent of the rewiring table.
pub fn exact_zero_bias_moments(d: &CenteredArray, k_max: u32, cap: usize) -> Result<Vec<MomentCheck>> {
    let n = d.n();
    check_cap(n, cap)?;
    if n < 6 {
        return Err(Error::DimensionTooSmall { n, min: 6 });
    }
    let lhs = lhs_moments(d, k_max, cap)?;
    let mut acc = vec![CompensatedSum::new(); k_max as usize];
    let completions = count_involutions(n - 4)? as f64;
    let mut base = vec![usize::MAX; n];
    for (q, p) in weighted_quadruples(d) {
        base.iter_mut().for_each(|x| *x = usize::MAX);
        base[q.i] = q.k;
        base[q.k] = q.i;
        base[q.j] = q.l;
        base[q.l] = q.j;
        let free: Vec<usize> = (0..n).filter(|&x| base[x] == usize::MAX).collect();
        let gap = 2.0 * (d.get(q.i, q.k) + d.get(q.j, q.l) - d.get(q.i, q.j) - d.get(q.k, q.l));
        let mut local = vec![0.0; k_max as usize];
        for_each_completion(&base, &free, |m| {
            let w_dagger = y_of_map(d, m);
            let w_ddagger = w_dagger - gap;
            for (slot, power) in local.iter_mut().zip(0..) {
                *slot += segment_power_mean(w_dagger, w_ddagger, power);
            }
        });
        for (s, v) in acc.iter_mut().zip(local) {
            s.add(p * v / completions);
        }
    }
    Ok(assemble_checks(lhs, acc))
}

/// The same identities with `W*` produced by the coupling itself: uniform
/// `π`, square-biased quadruple, `π†` from the table, `π‡` from `π†`.
pub fn exact_zero_bias_moments_coupled(
    d: &CenteredArray,
    k_max: u32,
    cap: usize,
) -> Result<Vec<MomentCheck>> {
    let n = d.n();
    check_cap(n, cap)?;
    if n < 6 {
        return Err(Error::DimensionTooSmall { n, min: 6 });
    }
    let lhs = lhs_moments(d, k_max, cap)?;
    let pis = enumerate_involutions(n, cap)?;
    let quads = weighted_quadruples(d);
    let per_pi: Vec<Result<Vec<f64>>> = pis
        .par_iter()
        .map(|pi| {
            let map = pi.as_slice();
            let w = y_of_map(d, map);
            let mut local = vec![CompensatedSum::new(); k_max as usize];
            for &(q, p) in &quads {
                let lt = local_terms(d, map, q)?;
                let w_dagger = w - lt.t + lt.t_dagger;
                let w_ddagger = w - lt.t + lt.t_ddagger;
                for (slot, power) in local.iter_mut().zip(0..) {
                    slot.add(p * segment_power_mean(w_dagger, w_ddagger, power));
                }
            }
            Ok(local.iter().map(CompensatedSum::value).collect())
        })
        .collect();
    let mut acc = vec![CompensatedSum::new(); k_max as usize];
    let count = pis.len() as f64;
    for row in per_pi {
        for (s, v) in acc.iter_mut().zip(row?) {
            s.add(v / count);
        }
    }
    Ok(assemble_checks(lhs, acc))
}

/// `E|W - W*|` by enumeration over `Π_n` × quadruples, integrating `U`
/// in closed form.
pub fn exact_gap(d: &CenteredArray, cap: usize) -> Result<f64> {
    let n = d.n();
    check_cap(n, cap)?;
    if n < 6 {
        return Err(Error::DimensionTooSmall { n, min: 6 });
    }
    let pis = enumerate_involutions(n, cap)?;
    let quads = weighted_quadruples(d);
    let per_pi: Vec<Result<f64>> = pis
        .par_iter()
        .map(|pi| {
            let map = pi.as_slice();
            let mut acc = CompensatedSum::new();
            for &(q, p) in &quads {
                let lt = local_terms(d, map, q)?;
                acc.add(p * mean_abs_linear(lt.t - lt.t_ddagger, lt.t_dagger - lt.t_ddagger));
            }
            Ok(acc.value())
        })
        .collect();
    let mut total = CompensatedSum::new();
    for v in per_pi {
        total.add(v?);
    }
    Ok(total.value() / pis.len() as f64)
}

#[cfg(test)]
fn dagger_map(pi: &[usize], q: Quadruple) -> Vec<usize> {
    let (_, chain) = dagger_chain(pi, q).unwrap();
    (0..pi.len()).map(|x| chain.image(pi, x)).collect()
}
