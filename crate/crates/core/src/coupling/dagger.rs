//! The ten-case construction of `π†` from `π` and a square-biased quadruple,
//! `π‡ = π† α^{π†}_{I†,J†}`, and the resulting zero-bias draw `W*`.

use rand::Rng;
use serde::Serialize;

use super::square_bias::QuadSampler;
use super::{alpha_compose, alpha_taus, Quadruple};
use crate::array::{CenteredArray, ScoreArray};
use crate::error::{Error, Result};
use crate::involution::{apply_transpositions, sample_into, Involution};
use crate::numeric::CompensatedSum;
use crate::stream::run_chunked;

/// `R1 = |{π(I),π(J)} ∩ {K,L}|`, `R2 = |{π(I),π(K)} ∩ {J,L}|` and the
/// matching row (1..=10) of the rewiring table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub r1: u8,
    pub r2: u8,
    pub case_id: u8,
}

/// Bitmask of table rows whose defining condition holds; bit `c - 1` for
/// row `c`. Exactly one bit is set on every input.
pub fn matching_cases(pi: &[usize], q: Quadruple) -> u16 {
    let Quadruple { i, j, k, l } = q;
    let (pi_i, pi_j, pi_k) = (pi[i], pi[j], pi[k]);
    let (r1, r2) = overlap_counts(pi, q);
    let rows = [
        pi_i == k && pi_j != l,
        pi_i != k && pi_j == l,
        pi_i == l && pi_j != k,
        pi_i != l && pi_j == k,
        pi_i == j && pi_k != l,
        pi_i != j && pi_k == l,
        pi_i == k && pi_j == l,
        pi_i == j && pi_k == l,
        pi_i == l && pi_j == k,
        r1 == 0 && r2 == 0,
    ];
    rows.iter()
        .enumerate()
        .fold(0, |mask, (c, &hit)| if hit { mask | (1 << c) } else { mask })
}

#[inline]
fn overlap_counts(pi: &[usize], q: Quadruple) -> (u8, u8) {
    let Quadruple { i, j, k, l } = q;
    let (pi_i, pi_j, pi_k) = (pi[i], pi[j], pi[k]);
    let r1 = [pi_i, pi_j].iter().filter(|&&x| x == k || x == l).count() as u8;
    let r2 = [pi_i, pi_k].iter().filter(|&&x| x == j || x == l).count() as u8;
    (r1, r2)
}

fn classify_map(pi: &[usize], q: Quadruple) -> Result<Classification> {
    let (r1, r2) = overlap_counts(pi, q);
    let mask = matching_cases(pi, q);
    if mask == 0 {
        return Err(Error::NoCaseMatched);
    }
    // first match wins; rows are disjoint
    let case_id = mask.trailing_zeros() as u8 + 1;
    Ok(Classification { r1, r2, case_id })
}

pub fn classify(pi: &Involution, q: Quadruple) -> Result<Classification> {
    if !q.is_distinct() {
        return Err(Error::EqualIndices(q.i));
    }
    classify_map(pi.as_slice(), q)
}

/// Right factors of `π†`: `π† = π ∘ taus[0] ∘ taus[1] ∘ ..`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TauChain {
    taus: [(usize, usize); 4],
    len: usize,
}

impl TauChain {
    fn new(parts: &[(usize, usize)]) -> Self {
        let mut taus = [(0, 0); 4];
        taus[..parts.len()].copy_from_slice(parts);
        TauChain { taus, len: parts.len() }
    }

    pub(crate) fn as_slice(&self) -> &[(usize, usize)] {
        &self.taus[..self.len]
    }

    /// `π†(x)`.
    #[inline]
    pub(crate) fn image(&self, pi: &[usize], x: usize) -> usize {
        pi[apply_transpositions(self.as_slice(), x)]
    }
}

/// Classification and the transposition chain producing `π†`.
pub(crate) fn dagger_chain(pi: &[usize], q: Quadruple) -> Result<(Classification, TauChain)> {
    let c = classify_map(pi, q)?;
    let Quadruple { i, j, k, l } = q;
    let a = |x, y| alpha_taus(pi, x, y);
    let chain = match c.case_id {
        1 => TauChain::new(&a(j, l)),
        2 => TauChain::new(&a(i, k)),
        3 => {
            let [t1, t2] = a(j, k);
            TauChain::new(&[t1, t2, (i, j), (k, l)])
        }
        4 => {
            let [t1, t2] = a(i, l);
            TauChain::new(&[t1, t2, (i, j), (k, l)])
        }
        5 => {
            let [t1, t2] = a(k, l);
            TauChain::new(&[t1, t2, (i, l), (j, k)])
        }
        6 => {
            let [t1, t2] = a(i, j);
            TauChain::new(&[t1, t2, (i, l), (j, k)])
        }
        7 => TauChain::new(&[]),
        8 => TauChain::new(&[(i, l), (j, k)]),
        9 => TauChain::new(&[(i, j), (k, l)]),
        10 => {
            let [t1, t2] = a(i, k);
            let [t3, t4] = a(j, l);
            TauChain::new(&[t1, t2, t3, t4])
        }
        _ => return Err(Error::NoCaseMatched),
    };
    Ok((c, chain))
}

/// `ℐ = {I,J,K,L,π(I),π(J),π(K),π(L)}`, sorted, 4 to 8 elements.
#[derive(Debug, Clone, Copy)]
pub(crate) struct IndexSet {
    items: [usize; 8],
    len: usize,
}

impl IndexSet {
    pub(crate) fn new(pi: &[usize], q: Quadruple) -> Self {
        let mut items = [0; 8];
        let mut len = 0;
        for x in q.as_array().into_iter().chain(q.as_array().map(|x| pi[x])) {
            if !items[..len].contains(&x) {
                items[len] = x;
                len += 1;
            }
        }
        items[..len].sort_unstable();
        IndexSet { items, len }
    }

    pub(crate) fn as_slice(&self) -> &[usize] {
        &self.items[..self.len]
    }
}

/// `(T, T†, T‡)`: the sums of `d_{x σ(x)}` over `x ∈ ℐ` for
/// `σ = π, π†, π‡`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalTerms {
    pub(crate) t: f64,
    pub(crate) t_dagger: f64,
    pub(crate) t_ddagger: f64,
}

#[inline]
pub(crate) fn local_terms<A: ScoreArray + ?Sized>(d: &A, pi: &[usize], q: Quadruple) -> Result<LocalTerms> {
    let (_, chain) = dagger_chain(pi, q)?;
    let set = IndexSet::new(pi, q);
    // π‡ = π† α^{π†}_{I,J} = π† τ_{I,L} τ_{J,K} since π†(I) = K, π†(J) = L
    let ddagger_taus = [(q.i, q.l), (q.j, q.k)];
    let (mut t, mut td, mut tdd) = (0.0, 0.0, 0.0);
    for &x in set.as_slice() {
        t += d.get(x, pi[x]);
        td += d.get(x, chain.image(pi, x));
        tdd += d.get(x, chain.image(pi, apply_transpositions(&ddagger_taus, x)));
    }
    Ok(LocalTerms { t, t_dagger: td, t_ddagger: tdd })
}

/// `π†` and its table row.
pub fn pi_dagger(pi: &Involution, q: Quadruple) -> Result<(Involution, u8)> {
    if !q.is_distinct() {
        return Err(Error::EqualIndices(q.i));
    }
    let (c, chain) = dagger_chain(pi.as_slice(), q)?;
    let dagger = pi.compose_transpositions(chain.as_slice())?;
    if !dagger.has_cycle(q.i, q.k) || !dagger.has_cycle(q.j, q.l) {
        return Err(Error::NotAnInvolution(format!(
            "π† misses the required cycles in case {}",
            c.case_id
        )));
    }
    Ok((dagger, c.case_id))
}

/// `π‡ = π† α^{π†}_{I†,J†}`.
pub fn pi_ddagger(pi_dagger: &Involution, q: Quadruple) -> Result<Involution> {
    alpha_compose(pi_dagger, q.i, q.j)
}

/// One coupled realization of `(W, W†, W‡, W*)`.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroBiasDraw {
    pub pi: Involution,
    pub quad: Quadruple,
    pub case_id: u8,
    pub r1: u8,
    pub r2: u8,
    pub pi_dagger: Involution,
    pub pi_ddagger: Involution,
    pub u: f64,
    pub w: f64,
    pub w_dagger: f64,
    pub w_ddagger: f64,
    pub w_star: f64,
    pub s: f64,
    pub t: f64,
    pub t_dagger: f64,
    pub t_ddagger: f64,
    /// 1-based elements of `ℐ`.
    pub index_set: Vec<usize>,
}

/// Consumes the generator in the fixed order `π`, quadruple, `U`.
fn draw_inputs<R: Rng + ?Sized>(
    d: &CenteredArray,
    sampler: &QuadSampler,
    rng: &mut R,
    map: &mut [usize],
    pool: &mut Vec<usize>,
) -> (Quadruple, f64) {
    sample_into(map, pool, rng);
    let q = sampler.sample(d, rng);
    let u = rng.random::<f64>();
    (q, u)
}

fn assemble(d: &CenteredArray, map: Vec<usize>, q: Quadruple, u: f64) -> Result<ZeroBiasDraw> {
    let pi = Involution::from_map(map)?;
    let class = classify(&pi, q)?;
    let (pi_dagger, case_id) = pi_dagger(&pi, q)?;
    let pi_ddagger = pi_ddagger(&pi_dagger, q)?;
    let set = IndexSet::new(pi.as_slice(), q);
    let in_set = |x: usize| set.as_slice().binary_search(&x).is_ok();
    let sum_over = |p: &Involution, inside: bool| {
        let mut acc = CompensatedSum::new();
        for x in (0..d.n()).filter(|&x| in_set(x) == inside) {
            acc.add(d.get(x, p.image(x)));
        }
        acc.value()
    };
    let s = sum_over(&pi, false);
    let t = sum_over(&pi, true);
    let t_dagger = sum_over(&pi_dagger, true);
    let t_ddagger = sum_over(&pi_ddagger, true);
    let (w, w_dagger, w_ddagger) = (s + t, s + t_dagger, s + t_ddagger);
    let w_star = u * w_dagger + (1.0 - u) * w_ddagger;
    Ok(ZeroBiasDraw {
        pi,
        quad: q,
        case_id,
        r1: class.r1,
        r2: class.r2,
        pi_dagger,
        pi_ddagger,
        u,
        w,
        w_dagger,
        w_ddagger,
        w_star,
        s,
        t,
        t_dagger,
        t_ddagger,
        index_set: set.as_slice().iter().map(|x| x + 1).collect(),
    })
}

/// Uniform `π`, square-biased quadruple, `π†` from the table, `π‡`, and an
/// independent `U ~ [0, 1)`.
pub fn zero_bias_draw<R: Rng + ?Sized>(
    d: &CenteredArray,
    sampler: &QuadSampler,
    rng: &mut R,
) -> Result<ZeroBiasDraw> {
    let n = d.n();
    if n < 6 {
        return Err(Error::DimensionTooSmall { n, min: 6 });
    }
    let mut map = vec![0; n];
    let (q, u) = draw_inputs(d, sampler, rng, &mut map, &mut Vec::with_capacity(n));
    assemble(d, map, q, u)
}

/// The first `k` draws of the stream used by [`estimate_gap`].
pub fn zero_bias_draws(
    d: &CenteredArray,
    sampler: &QuadSampler,
    k: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<ZeroBiasDraw>> {
    let n = d.n();
    if n < 6 {
        return Err(Error::DimensionTooSmall { n, min: 6 });
    }
    let draws = run_chunked(seed, k, threads, |rng, count| {
        let mut pool = Vec::with_capacity(n);
        (0..count)
            .map(|_| {
                let mut map = vec![0; n];
                let (q, u) = draw_inputs(d, sampler, rng, &mut map, &mut pool);
                assemble(d, map, q, u)
            })
            .collect()
    })?;
    draws.into_iter().collect()
}

/// Monte Carlo estimate of `E|W - W*|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub draws: usize,
}

/// `E_U |x - U y|` for `U ~ Uniform[0, 1]`.
#[inline]
pub(crate) fn mean_abs_linear(x: f64, y: f64) -> f64 {
    let end = x - y;
    if x * end >= 0.0 {
        0.5 * (x + end).abs()
    } else {
        0.5 * (x * x + end * end) / y.abs()
    }
}

/// Mean and standard error of `|W - W*|` over `m` coupled draws.
pub fn estimate_gap(
    d: &CenteredArray,
    sampler: &QuadSampler,
    m: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<GapEstimate> {
    let n = d.n();
    if n < 6 {
        return Err(Error::DimensionTooSmall { n, min: 6 });
    }
    if m == 0 {
        return Err(Error::EmptySample);
    }
    let gaps = run_chunked(seed, m, threads, |rng, count| {
        let mut map = vec![0; n];
        let mut pool = Vec::with_capacity(n);
        (0..count)
            .map(|_| {
                let (q, u) = draw_inputs(d, sampler, rng, &mut map, &mut pool);
                let lt = local_terms(d, &map, q)?;
                // W - W* = T - (U T† + (1-U) T‡)
                Ok((lt.t - (u * lt.t_dagger + (1.0 - u) * lt.t_ddagger)).abs())
            })
            .collect::<Vec<Result<f64>>>()
    })?;
    let gaps = gaps.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut sum = CompensatedSum::new();
    gaps.iter().for_each(|&g| sum.add(g));
    let mean = sum.value() / m as f64;
    let mut sq = CompensatedSum::new();
    gaps.iter().for_each(|&g| sq.add((g - mean).powi(2)));
    let var = if m > 1 { sq.value() / (m - 1) as f64 } else { 0.0 };
    Ok(GapEstimate { mean, stderr: (var / m as f64).sqrt(), draws: m })
}
