//! The square-bias law on index quadruples,
//! `p(i,j,k,l) = c_n [d_ik + d_jl - (d_ij + d_kl)]^2 1(|{i,j,k,l}| = 4)`.

use rand::Rng;

use super::Quadruple;
use crate::array::{CenteredArray, ScoreArray};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Largest `n` for which the `n^4` table is materialized.
pub const TABLE_CAP: usize = 48;

/// `c_n = 1 / (2 (n-1)^2 (n-3))`.
pub fn c_n(n: usize) -> f64 {
    let nf = n as f64;
    1.0 / (2.0 * (nf - 1.0).powi(2) * (nf - 3.0))
}

/// `[d_ik + d_jl - (d_ij + d_kl)]^2`.
#[inline]
pub fn square_term<A: ScoreArray + ?Sized>(d: &A, q: Quadruple) -> f64 {
    let s = d.get(q.i, q.k) + d.get(q.j, q.l) - (d.get(q.i, q.j) + d.get(q.k, q.l));
    s * s
}

/// Visits every ordered quadruple of distinct indices in lexicographic order.
pub fn for_each_distinct_quadruple(n: usize, mut f: impl FnMut(Quadruple)) {
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                for l in 0..n {
                    if l == i || l == j || l == k {
                        continue;
                    }
                    f(Quadruple { i, j, k, l });
                }
            }
        }
    }
}

/// Materialized square-bias law with cumulative-sum inversion.
#[derive(Debug, Clone)]
pub struct QuadrupleTable {
    n: usize,
    c_n: f64,
    /// Σ of the square terms over distinct quadruples; `c_n * raw_total ≈ 1`.
    raw_total: f64,
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl QuadrupleTable {
    pub fn build(d: &CenteredArray, cap: usize) -> Result<Self> {
        let n = d.n();
        if n < 4 {
            return Err(Error::DimensionTooSmall { n, min: 4 });
        }
        if n > cap {
            return Err(Error::CapExceeded { n, cap });
        }
        let len = n * n * n * n;
        let mut cumulative = Vec::with_capacity(len);
        let mut running = 0.0;
        let mut total = CompensatedSum::new();
        let mut last_positive = 0;
        for idx in 0..len {
            let q = decode(n, idx);
            if q.is_distinct() {
                let w = square_term(d, q);
                running += w;
                total.add(w);
                if w > 0.0 {
                    last_positive = idx;
                }
            }
            cumulative.push(running);
        }
        Ok(QuadrupleTable { n, c_n: c_n(n), raw_total: total.value(), cumulative, last_positive })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    /// `c_n Σ [..]^2`; equals 1 for a standardized array.
    pub fn normalization(&self) -> f64 {
        self.c_n * self.raw_total
    }

    /// Normalized weight `p(q)` (zero unless the indices are distinct).
    pub fn weight(&self, q: Quadruple) -> f64 {
        if !q.is_distinct() {
            return 0.0;
        }
        let idx = encode(self.n, q);
        let prev = if idx == 0 { 0.0 } else { self.cumulative[idx - 1] };
        (self.cumulative[idx] - prev) / self.cumulative[self.cumulative.len() - 1]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Quadruple {
        let total = self.cumulative[self.cumulative.len() - 1];
        let u = rng.random::<f64>() * total;
        let mut idx = self.cumulative.partition_point(|&c| c <= u);
        if idx >= self.cumulative.len() {
            idx = self.last_positive;
        }
        decode(self.n, idx)
    }
}

#[inline]
fn encode(n: usize, q: Quadruple) -> usize {
    ((q.i * n + q.j) * n + q.k) * n + q.l
}

#[inline]
fn decode(n: usize, idx: usize) -> Quadruple {
    Quadruple { i: idx / (n * n * n), j: (idx / (n * n)) % n, k: (idx / n) % n, l: idx % n }
}

/// Draws quadruples from the square-bias law: the materialized table for
/// `n <= cap`, otherwise rejection from uniform distinct quadruples.
#[derive(Debug, Clone)]
pub enum QuadSampler {
    Table(QuadrupleTable),
    /// Accept with probability `[..]^2 / bound`, `bound = 16 max|d|^2`.
    Rejection { n: usize, bound: f64 },
}

impl QuadSampler {
    pub fn new(d: &CenteredArray, cap: usize) -> Result<Self> {
        if d.n() <= cap {
            Ok(QuadSampler::Table(QuadrupleTable::build(d, cap)?))
        } else {
            Ok(Self::rejection(d))
        }
    }

    pub fn rejection(d: &CenteredArray) -> Self {
        let m = d.max_abs();
        QuadSampler::Rejection { n: d.n(), bound: 16.0 * m * m }
    }

    pub fn sample<R: Rng + ?Sized>(&self, d: &CenteredArray, rng: &mut R) -> Quadruple {
        match self {
            QuadSampler::Table(t) => t.sample(rng),
            QuadSampler::Rejection { n, bound } => loop {
                let q = uniform_distinct_quadruple(*n, rng);
                if rng.random::<f64>() * bound < square_term(d, q) {
                    return q;
                }
            },
        }
    }
}

fn uniform_distinct_quadruple<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Quadruple {
    let mut picked = [0usize; 4];
    for slot in 0..4 {
        // uniform over the n - slot unused values, in increasing order
        let mut x = rng.random_range(0..n - slot);
        let mut used = picked[..slot].to_vec();
        used.sort_unstable();
        for u in used {
            if x >= u {
                x += 1;
            }
        }
        picked[slot] = x;
    }
    Quadruple { i: picked[0], j: picked[1], k: picked[2], l: picked[3] }
}
