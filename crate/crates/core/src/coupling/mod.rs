//! Stein exchangeable pair and the zero-bias coupling built on it.
//!
//! `π' = π α^π_{I,J}` with `α^π_{i,j} = τ_{i,π(j)} τ_{j,π(i)}` rewires the
//! cycles `(i,π(i)), (j,π(j))` into `(i,j), (π(i),π(j))`. Biasing the index
//! quadruple `(I,J,π(I),π(J))` by the squared difference `(W-W')^2` and
//! rewiring `π` with the ten-case table in [`dagger`] yields `(π†, π‡)`,
//! and `W* = U W† + (1-U) W‡` has the `W` zero-bias law.

pub mod dagger;
pub mod exact;
pub mod square_bias;

use rand::Rng;
use serde::{Serialize, Serializer};

use crate::array::{CenteredArray, ScoreArray};
use crate::error::{Error, Result};
use crate::involution::{sample_involution, y_value, Involution};

pub use dagger::{
    classify, estimate_gap, pi_dagger, pi_ddagger, zero_bias_draw, zero_bias_draws, Classification,
    GapEstimate, ZeroBiasDraw,
};
pub use exact::{
    case_table_sweep, exact_gap, exact_pi_dagger_marginal, exact_zero_bias_moments,
    exact_zero_bias_moments_coupled, index_image_laws, stein_pair_exact, MomentCheck,
    EXACT_COUPLING_CAP,
};
pub use square_bias::{c_n, square_term, QuadSampler, QuadrupleTable, TABLE_CAP};

/// Ordered quadruple `(I†, J†, K†, L†)` of distinct 0-based indices;
/// `K†, L†` are the images of `I†, J†` under `π†`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Quadruple {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
}

impl Quadruple {
    pub fn new(i: usize, j: usize, k: usize, l: usize) -> Self {
        Quadruple { i, j, k, l }
    }

    /// From 1-based indices.
    pub fn one_based(i: usize, j: usize, k: usize, l: usize) -> Self {
        Quadruple { i: i - 1, j: j - 1, k: k - 1, l: l - 1 }
    }

    pub fn is_distinct(&self) -> bool {
        let Quadruple { i, j, k, l } = *self;
        i != j && i != k && i != l && j != k && j != l && k != l
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.i, self.j, self.k, self.l]
    }
}

impl Serialize for Quadruple {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.i + 1, self.j + 1, self.k + 1, self.l + 1].serialize(s)
    }
}

/// `π α^π_{i,j}`. When `π(i) = j` both transpositions degenerate to the
/// identity and `π` is returned unchanged.
pub fn alpha_compose(pi: &Involution, i: usize, j: usize) -> Result<Involution> {
    if i == j {
        return Err(Error::EqualIndices(i));
    }
    pi.compose_transpositions(&alpha_taus(pi.as_slice(), i, j))
}

#[inline]
pub(crate) fn alpha_taus(pi: &[usize], i: usize, j: usize) -> [(usize, usize); 2] {
    [(i, pi[j]), (j, pi[i])]
}

/// `W - W' = 2(d_{Iπ(I)} + d_{Jπ(J)} - d_{IJ} - d_{π(I)π(J)})`.
#[inline]
pub fn stein_difference<A: ScoreArray + ?Sized>(d: &A, pi: &[usize], i: usize, j: usize) -> f64 {
    let (pi_i, pi_j) = (pi[i], pi[j]);
    2.0 * (d.get(i, pi_i) + d.get(j, pi_j) - (d.get(i, j) + d.get(pi_i, pi_j)))
}

/// One realization of the exchangeable pair.
#[derive(Debug, Clone, Serialize)]
pub struct SteinPairDraw {
    pub pi: Involution,
    pub pi_prime: Involution,
    #[serde(serialize_with = "one_based")]
    pub i: usize,
    #[serde(serialize_with = "one_based")]
    pub j: usize,
    pub w: f64,
    pub w_prime: f64,
}

fn one_based<S: Serializer>(x: &usize, s: S) -> std::result::Result<S::Ok, S::Error> {
    (x + 1).serialize(s)
}

/// Uniform `π`, independent uniform ordered pair `I != J`, `π' = π α^π_{I,J}`.
pub fn stein_pair_draw<R: Rng + ?Sized>(d: &CenteredArray, rng: &mut R) -> Result<SteinPairDraw> {
    let n = d.n();
    if n < 4 {
        return Err(Error::DimensionTooSmall { n, min: 4 });
    }
    let pi = sample_involution(n, rng)?;
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let pi_prime = alpha_compose(&pi, i, j)?;
    let w = y_value(d, &pi)?;
    let w_prime = y_value(d, &pi_prime)?;
    Ok(SteinPairDraw { pi, pi_prime, i, j, w, w_prime })
}
