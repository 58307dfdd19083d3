//! Fixed-point-free involutions: representation, enumeration, uniform
//! sampling and the exact law of `W = Σ_i d_{i π(i)}`.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::array::{CenteredArray, ScoreArray};
use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};

/// Default largest `n` for which involutions are enumerated.
pub const ENUMERATION_CAP: usize = 16;

/// Absolute tolerance when merging equal values into one atom.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// A permutation `π` of `{0, .., n-1}` with `π(π(i)) = i` and `π(i) != i`.
///
/// Indices are 0-based in memory and 1-based when serialized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Involution {
    map: Vec<usize>,
}

fn check_map(map: &[usize]) -> Result<()> {
    let n = map.len();
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    for (i, &p) in map.iter().enumerate() {
        if p >= n {
            return Err(Error::NotAnInvolution(format!("image {p} of {i} out of range")));
        }
        if p == i {
            return Err(Error::NotAnInvolution(format!("fixed point at {i}")));
        }
        if map[p] != i {
            return Err(Error::NotAnInvolution(format!("π(π({i})) = {} != {i}", map[p])));
        }
    }
    Ok(())
}

impl Involution {
    /// Validates a 0-based image array.
    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        check_map(&map)?;
        Ok(Involution { map })
    }

    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        let map = images
            .iter()
            .map(|&x| {
                x.checked_sub(1)
                    .ok_or_else(|| Error::NotAnInvolution("image 0 in 1-based input".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_map(map)
    }

    /// Builds from disjoint 0-based pairs covering `0..n`.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut map = vec![usize::MAX; n];
        for &(a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::NotAnInvolution(format!("pair ({a}, {b}) out of range")));
            }
            map[a] = b;
            map[b] = a;
        }
        if map.contains(&usize::MAX) {
            return Err(Error::NotAnInvolution("pairs do not cover every index".into()));
        }
        Self::from_map(map)
    }

    pub(crate) fn from_map_unchecked(map: Vec<usize>) -> Self {
        debug_assert!(check_map(&map).is_ok());
        Involution { map }
    }

    pub fn n(&self) -> usize {
        self.map.len()
    }

    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.map.iter().map(|&x| x + 1).collect()
    }

    /// Cycles `(i, π(i))` with `i < π(i)`, in increasing order of `i`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.map
            .iter()
            .enumerate()
            .filter(|&(i, &p)| i < p)
            .map(|(i, &p)| (i, p))
            .collect()
    }

    pub fn has_cycle(&self, a: usize, b: usize) -> bool {
        a != b && self.map[a] == b
    }

    /// `π ∘ τ_1 ∘ .. ∘ τ_k` where `τ = (a, b)` swaps `a` and `b`, and `τ_{a,a}`
    /// is the identity. Only the moved indices are recomputed; the result is
    /// checked to be a fixed-point-free involution on them.
    pub fn compose_transpositions(&self, taus: &[(usize, usize)]) -> Result<Involution> {
        let mut map = self.map.clone();
        let mut touched = [usize::MAX; 8];
        let mut nt = 0;
        for &(a, b) in taus {
            for x in [a, b] {
                if !touched[..nt].contains(&x) {
                    touched[nt] = x;
                    nt += 1;
                }
            }
        }
        for &x in &touched[..nt] {
            map[x] = self.map[apply_transpositions(taus, x)];
        }
        for &x in &touched[..nt] {
            let y = map[x];
            if y == x || map[y] != x {
                return Err(Error::NotAnInvolution(format!(
                    "composition breaks involution property at index {x}"
                )));
            }
        }
        Ok(Involution { map })
    }
}

/// `τ_1 ∘ .. ∘ τ_k (x)`: the rightmost transposition acts first.
#[inline]
pub fn apply_transpositions(taus: &[(usize, usize)], x: usize) -> usize {
    taus.iter().rev().fold(x, |y, &(a, b)| {
        if y == a {
            b
        } else if y == b {
            a
        } else {
            y
        }
    })
}

impl Serialize for Involution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Involution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        Involution::from_one_based(&v).map_err(serde::de::Error::custom)
    }
}

/// `(n-1)!! = |Π_n|`, via `|Π_n| = (n-1) |Π_{n-2}|`.
pub fn count_involutions(n: usize) -> Result<u64> {
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    Ok((1..n as u64).step_by(2).product())
}

fn visit_matchings(free: &[usize], map: &mut [usize], f: &mut dyn FnMut(&[usize])) {
    let Some((&a, rest)) = free.split_first() else {
        f(map);
        return;
    };
    let mut remaining = Vec::with_capacity(rest.len().saturating_sub(1));
    for (k, &b) in rest.iter().enumerate() {
        map[a] = b;
        map[b] = a;
        remaining.clear();
        remaining.extend(rest[..k].iter().chain(&rest[k + 1..]).copied());
        visit_matchings(&remaining, map, f);
    }
}

/// Calls `f` on every completion of `base` obtained by pairing the indices
/// in `free` among themselves, in canonical order (the smallest free index
/// is paired with each larger one in turn, recursively). Entries of `base`
/// outside `free` are left untouched.
pub fn for_each_completion(base: &[usize], free: &[usize], mut f: impl FnMut(&[usize])) {
    let mut sorted = free.to_vec();
    sorted.sort_unstable();
    let mut map = base.to_vec();
    visit_matchings(&sorted, &mut map, &mut f);
}

/// Visits all of `Π_n` in canonical order without allocating per element.
pub fn for_each_involution(n: usize, cap: usize, f: impl FnMut(&[usize])) -> Result<()> {
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    let free: Vec<usize> = (0..n).collect();
    for_each_completion(&vec![usize::MAX; n], &free, f);
    Ok(())
}

pub fn enumerate_involutions(n: usize, cap: usize) -> Result<Vec<Involution>> {
    let mut out = Vec::with_capacity(count_involutions(n)? as usize);
    for_each_involution(n, cap, |m| out.push(Involution::from_map_unchecked(m.to_vec())))?;
    Ok(out)
}

/// Fills `map` with a uniform element of `Π_n` by sequential pairing:
/// an unmatched index is paired with a uniform choice among the other
/// unmatched indices. `pool` is scratch space.
pub fn sample_into<R: Rng + ?Sized>(map: &mut [usize], pool: &mut Vec<usize>, rng: &mut R) {
    let n = map.len();
    pool.clear();
    pool.extend(0..n);
    while let Some(a) = pool.pop() {
        let k = rng.random_range(0..pool.len());
        let b = pool.swap_remove(k);
        map[a] = b;
        map[b] = a;
    }
}

pub fn sample_involution<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Involution> {
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    if n == 0 {
        return Err(Error::DimensionTooSmall { n, min: 2 });
    }
    let mut map = vec![0; n];
    sample_into(&mut map, &mut Vec::with_capacity(n), rng);
    Ok(Involution::from_map_unchecked(map))
}

/// `Σ_i e_{i π(i)}` over a raw image slice.
#[inline]
pub fn y_of_map<A: ScoreArray + ?Sized>(e: &A, map: &[usize]) -> f64 {
    let n = e.n();
    let data = e.entries();
    let mut acc = 0.0;
    for (i, &p) in map.iter().enumerate() {
        acc += data[i * n + p];
    }
    acc
}

/// `Y_E(π) = Σ_i e_{i π(i)}`.
pub fn y_value<A: ScoreArray + ?Sized>(e: &A, pi: &Involution) -> Result<f64> {
    if e.n() != pi.n() {
        return Err(Error::DimensionMismatch { expected: e.n(), found: pi.n() });
    }
    Ok(y_of_map(e, &pi.map))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub value: f64,
    /// Number of equally likely outcomes landing on this atom.
    pub count: u64,
}

/// A finitely supported law with rational probabilities `count / total`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    atoms: Vec<Atom>,
    total: u64,
}

impl ExactDistribution {
    /// Law of equally likely `values`, merging values within
    /// [`ATOM_MERGE_TOL`] of a group's smallest member.
    pub fn from_equally_likely(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        values.sort_by(f64::total_cmp);
        let total = values.len() as u64;
        let mut atoms = Vec::new();
        let mut start = 0;
        while start < values.len() {
            let mut end = start + 1;
            while end < values.len() && values[end] - values[start] <= ATOM_MERGE_TOL {
                end += 1;
            }
            let group = &values[start..end];
            let value = numeric::sum(group.iter().copied()) / group.len() as f64;
            atoms.push(Atom { value, count: group.len() as u64 });
            start = end;
        }
        Ok(ExactDistribution { atoms, total })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, atom: &Atom) -> f64 {
        atom.count as f64 / self.total as f64
    }

    /// `E[X^k]`.
    pub fn moment(&self, k: i32) -> f64 {
        let mut acc = CompensatedSum::new();
        for a in &self.atoms {
            acc.add(a.count as f64 * a.value.powi(k));
        }
        acc.value() / self.total as f64
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let mut acc = CompensatedSum::new();
        for a in &self.atoms {
            acc.add(a.count as f64 * (a.value - m).powi(2));
        }
        acc.value() / self.total as f64
    }

    /// Index of the atom holding `x`, if any.
    pub fn atom_index(&self, x: f64) -> Option<usize> {
        let pos = self.atoms.partition_point(|a| a.value < x - ATOM_MERGE_TOL);
        (pos..self.atoms.len().min(pos + 2))
            .find(|&k| (self.atoms[k].value - x).abs() <= ATOM_MERGE_TOL)
    }
}

/// All `|Π_n|` equally likely values of `W = Y_D(π)`.
pub fn exact_w_values(d: &CenteredArray, cap: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(count_involutions(d.n())? as usize);
    for_each_involution(d.n(), cap, |m| values.push(y_of_map(d, m)))?;
    Ok(values)
}

pub fn exact_w_distribution(d: &CenteredArray, cap: usize) -> Result<ExactDistribution> {
    ExactDistribution::from_equally_likely(exact_w_values(d, cap)?)
}
