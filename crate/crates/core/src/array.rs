//! Score arrays: validation, hat-centering, moments and standardization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};

/// Default relative tolerance for the symmetry / zero-diagonal check.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-9;

/// Variances at or below this multiple of `max|e|^2` count as zero.
pub const DEGENERATE_REL_CUTOFF: f64 = 1e-14;

/// Read access to an `n x n` row-major score array.
pub trait ScoreArray {
    fn n(&self) -> usize;
    fn entries(&self) -> &[f64];

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.entries()[i * self.n() + j]
    }
}

/// An unvalidated square matrix as read from input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMatrix {
    pub n: usize,
    pub entries: Vec<Vec<f64>>,
}

impl RawMatrix {
    pub fn from_rows(entries: Vec<Vec<f64>>) -> Self {
        RawMatrix { n: entries.len(), entries }
    }
}

/// Symmetric array with zero diagonal on an even number `n >= 4` of indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricArray {
    n: usize,
    data: Vec<f64>,
}

impl ScoreArray for SymmetricArray {
    fn n(&self) -> usize {
        self.n
    }
    fn entries(&self) -> &[f64] {
        &self.data
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    if n < 4 {
        return Err(Error::DimensionTooSmall { n, min: 4 });
    }
    Ok(())
}

impl SymmetricArray {
    /// Builds from a row-major buffer, enforcing exact symmetry and a zero
    /// diagonal by averaging `(e_ij + e_ji) / 2`. No tolerance check.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        check_dimension(n)?;
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { i: pos / n, j: pos % n });
        }
        let mut data = data;
        for i in 0..n {
            data[i * n + i] = 0.0;
            for j in (i + 1)..n {
                let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        Ok(SymmetricArray { n, data })
    }

    /// Builds from a closure evaluated on the upper triangle `i < j`.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_dimension(n)?;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::NonFinite { i, j });
                }
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(SymmetricArray { n, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        numeric::sum(self.row(i).iter().copied())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row_sum(i)).collect()
    }

    pub fn total(&self) -> f64 {
        numeric::sum(self.data.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        SymmetricArray::from_row_major(self.n, self.data.iter().map(|x| x * c).collect())
    }

    /// Adds `c` to every off-diagonal entry.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let n = self.n;
        SymmetricArray::from_upper_fn(n, |i, j| self.get(i, j) + c)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Hat-centered array: all marginal sums vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct HatArray(SymmetricArray);

impl HatArray {
    pub fn array(&self) -> &SymmetricArray {
        &self.0
    }
}

impl ScoreArray for HatArray {
    fn n(&self) -> usize {
        self.0.n
    }
    fn entries(&self) -> &[f64] {
        &self.0.data
    }
}

/// Standardized array `D = Ê / σ_E`: symmetric, zero diagonal, zero row sums,
/// and `Var(Y_D) = 1` under a uniform fixed-point-free involution.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredArray {
    array: SymmetricArray,
    beta: f64,
}

impl CenteredArray {
    pub fn array(&self) -> &SymmetricArray {
        &self.array
    }

    /// Third absolute moment sum `Σ_{i≠j} |d_ij|^3`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn max_abs(&self) -> f64 {
        self.array.max_abs()
    }
}

impl ScoreArray for CenteredArray {
    fn n(&self) -> usize {
        self.array.n
    }
    fn entries(&self) -> &[f64] {
        &self.array.data
    }
}

/// Mean, variance and third-moment quantity of `Y_E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    pub mu: f64,
    pub sigma2: f64,
    /// `None` when the variance is zero.
    pub beta: Option<f64>,
}

/// Checks squareness, finiteness, parity and (unless `symmetrize`) symmetry
/// within `tol * max(1, max|e|)`. The result is exactly symmetric with a
/// zero diagonal.
pub fn validate_and_symmetrize(raw: &RawMatrix, symmetrize: bool, tol: f64) -> Result<SymmetricArray> {
    let n = raw.entries.len();
    for (row, r) in raw.entries.iter().enumerate() {
        if r.len() != n {
            return Err(Error::NotSquare { row, len: r.len(), expected: n });
        }
    }
    if raw.n != n {
        return Err(Error::DimensionMismatch { expected: raw.n, found: n });
    }
    for (i, r) in raw.entries.iter().enumerate() {
        if let Some(j) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { i, j });
        }
    }
    check_dimension(n)?;
    if !symmetrize {
        let scale = raw
            .entries
            .iter()
            .flatten()
            .fold(1.0f64, |m, x| m.max(x.abs()));
        let tol_abs = tol * scale;
        for i in 0..n {
            let value = raw.entries[i][i];
            if value.abs() > tol_abs {
                return Err(Error::DiagonalExceedsTolerance { i, value, tol: tol_abs });
            }
            for j in (i + 1)..n {
                let diff = (raw.entries[i][j] - raw.entries[j][i]).abs();
                if diff > tol_abs {
                    return Err(Error::AsymmetryExceedsTolerance { i, j, diff, tol: tol_abs });
                }
            }
        }
    }
    SymmetricArray::from_row_major(n, raw.entries.iter().flatten().copied().collect())
}

/// `ê_ij = e_ij - e_i+/(n-2) - e_+j/(n-2) + e_++/((n-1)(n-2))`, `ê_ii = 0`.
pub fn center_hat(e: &SymmetricArray) -> HatArray {
    let n = e.n;
    let rows = e.row_sums();
    let total = numeric::sum(rows.iter().copied());
    let nf = n as f64;
    let grand = total / ((nf - 1.0) * (nf - 2.0));
    let data = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            if i == j {
                0.0
            } else {
                e.data[idx] - rows[i] / (nf - 2.0) - rows[j] / (nf - 2.0) + grand
            }
        })
        .collect::<Vec<_>>();
    let mut hat = SymmetricArray { n, data };
    // enforce bitwise symmetry
    for i in 0..n {
        for j in (i + 1)..n {
            let v = hat.data[i * n + j];
            hat.data[j * n + i] = v;
        }
    }
    HatArray(hat)
}

/// Variance of `Y` for an array whose marginal sums vanish.
pub fn variance_of_centered<A: ScoreArray>(hat: &A) -> f64 {
    let nf = hat.n() as f64;
    let sq = numeric::sum(hat.entries().iter().map(|x| x * x));
    2.0 * (nf - 2.0) / ((nf - 1.0) * (nf - 3.0)) * sq
}

fn third_abs_sum<A: ScoreArray>(a: &A) -> f64 {
    numeric::sum(a.entries().iter().map(|x| x.abs().powi(3)))
}

fn is_degenerate(sigma2: f64, scale: f64) -> bool {
    sigma2 <= DEGENERATE_REL_CUTOFF * scale * scale
}

/// Mean and variance of `Y_E` in closed form, and `β_E` when `σ_E² > 0`.
pub fn moments(e: &SymmetricArray) -> Result<MomentSummary> {
    let n = e.n;
    if n < 4 {
        return Err(Error::DimensionTooSmall { n, min: 4 });
    }
    let nf = n as f64;
    let rows = e.row_sums();
    let total = numeric::sum(rows.iter().copied());
    let sq = numeric::sum(e.data.iter().map(|x| x * x));
    let row_sq = numeric::sum(rows.iter().map(|r| r * r));
    let mut inner = CompensatedSum::new();
    inner.add((nf - 2.0) * sq);
    inner.add(total * total / (nf - 1.0));
    inner.add(-2.0 * row_sq);
    let sigma2 = (2.0 / ((nf - 1.0) * (nf - 3.0)) * inner.value()).max(0.0);
    let mu = total / (nf - 1.0);
    let beta = if is_degenerate(sigma2, e.max_abs()) {
        None
    } else {
        let hat = center_hat(e);
        Some(third_abs_sum(&hat) / sigma2.powf(1.5))
    };
    Ok(MomentSummary { n, mu, sigma2, beta })
}

/// `d_ij = ê_ij / σ_E`.
pub fn standardize(e: &SymmetricArray) -> Result<CenteredArray> {
    let hat = center_hat(e);
    let sigma2 = variance_of_centered(&hat);
    if is_degenerate(sigma2, e.max_abs()) {
        return Err(Error::DegenerateArray);
    }
    let sigma = sigma2.sqrt();
    let n = e.n;
    let data = hat.0.data.iter().map(|x| x / sigma).collect();
    let array = SymmetricArray { n, data };
    let beta = third_abs_sum(&array);
    debug_assert!((variance_of_centered(&array) - 1.0).abs() < 1e-8);
    Ok(CenteredArray { array, beta })
}

pub fn beta_value(d: &CenteredArray) -> f64 {
    d.beta
}

/// Symmetric array with i.i.d. off-diagonal entries drawn by `entry`.
pub fn random_symmetric_with<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    mut entry: impl FnMut(&mut R) -> f64,
) -> Result<SymmetricArray> {
    SymmetricArray::from_upper_fn(n, |_, _| entry(rng))
}

/// Off-diagonal entries uniform on `[-1, 1)`.
pub fn random_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SymmetricArray> {
    random_symmetric_with(n, rng, |r| r.random_range(-1.0..1.0))
}

/// Standardized version of [`random_symmetric`].
pub fn random_centered<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CenteredArray> {
    standardize(&random_symmetric(n, rng)?)
}
