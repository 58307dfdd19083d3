//! Distances between a step distribution function and the standard normal.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use libm::erfc;

use crate::error::{Error, Result};
use crate::involution::ExactDistribution;
use crate::numeric::CompensatedSum;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Half-width of the window used by the direct `L^p` quadrature; both
/// normal tails are below `1e-16` outside it.
pub const QUADRATURE_HALF_WIDTH: f64 = 8.5;

/// `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `φ(x)`.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `∫_{-∞}^t Φ = t Φ(t) + φ(t)`.
fn lower_antiderivative(t: f64) -> f64 {
    t * normal_cdf(t) + normal_pdf(t)
}

/// `∫_t^∞ (1 - Φ) = φ(t) - t (1 - Φ(t))`.
fn upper_antiderivative(t: f64) -> f64 {
    normal_pdf(t) - t * normal_cdf(-t)
}

/// `∫_a^b Φ` for `a <= b`.
fn integral_cdf(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        (b - a) - (upper_antiderivative(a) - upper_antiderivative(b))
    } else {
        lower_antiderivative(b) - lower_antiderivative(a)
    }
}

/// Right-continuous step function with jumps at `points` and value
/// `cumulative[i]` on `[points[i], points[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepCdf {
    points: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepCdf {
    /// From `(value, weight)` pairs with positive weights; equal values are
    /// merged and weights normalized.
    pub fn from_weighted(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySample);
        }
        if atoms.iter().any(|&(x, w)| !x.is_finite() || !(w >= 0.0)) {
            return Err(Error::Parse("step function atoms must be finite with non-negative weight".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = crate::numeric::sum(atoms.iter().map(|a| a.1));
        let mut points: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut masses: Vec<f64> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            if w == 0.0 {
                continue;
            }
            if points.last() == Some(&x) {
                *masses.last_mut().unwrap() += w;
            } else {
                points.push(x);
                masses.push(w);
            }
        }
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut running = CompensatedSum::new();
        let mut cumulative: Vec<f64> = masses
            .iter()
            .map(|&w| {
                running.add(w);
                (running.value() / total).min(1.0)
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(StepCdf { points, cumulative })
    }

    /// Empirical distribution function of `samples`.
    pub fn ecdf(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len() as f64;
        let mut points = Vec::new();
        let mut cumulative = Vec::new();
        for (idx, &x) in sorted.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::Parse(format!("non-finite sample {x}")));
            }
            let c = (idx + 1) as f64 / m;
            if points.last() == Some(&x) {
                *cumulative.last_mut().unwrap() = c;
            } else {
                points.push(x);
                cumulative.push(c);
            }
        }
        Ok(StepCdf { points, cumulative })
    }

    pub fn from_exact(law: &ExactDistribution) -> Self {
        let total = law.total() as f64;
        let mut running = 0u64;
        let points = law.atoms().iter().map(|a| a.value).collect();
        let cumulative = law
            .atoms()
            .iter()
            .map(|a| {
                running += a.count;
                running as f64 / total
            })
            .collect();
        StepCdf { points, cumulative }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// `F(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.points.partition_point(|&x| x <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// `(left end, right end, value)` of each finite constant piece
    /// between consecutive jumps.
    fn inner_pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.points
            .windows(2)
            .zip(&self.cumulative)
            .map(|(w, &c)| (w[0], w[1], c))
    }
}

/// `sup_t |F(t) - Φ(t)|`, attained at or just left of a jump.
pub fn kolmogorov_distance(f: &StepCdf) -> f64 {
    let mut prev = 0.0;
    let mut best = 0.0f64;
    for (&x, &c) in f.points.iter().zip(&f.cumulative) {
        let phi = normal_cdf(x);
        best = best.max((c - phi).abs()).max((phi - prev).abs());
        prev = c;
    }
    best
}

/// Solution of `Φ(t) = c` for `c ∈ (0, 1)`, by bisection.
pub fn crossing(c: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if normal_cdf(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `∫_a^b |c - Φ|` for `0 < c < 1`.
fn piece_l1(a: f64, b: f64, c: f64) -> f64 {
    let t = crossing(c);
    // Φ - c on [a, b] ∩ [t, ∞), c - Φ on the rest
    let above = |a: f64, b: f64| integral_cdf(a, b) - c * (b - a);
    if t <= a {
        above(a, b)
    } else if t >= b {
        -above(a, b)
    } else {
        -above(a, t) + above(t, b)
    }
}

/// `∫ |F(t) - Φ(t)| dt`, exact on each piece.
pub fn l1_distance(f: &StepCdf) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.add(lower_antiderivative(f.points[0]));
    acc.add(upper_antiderivative(*f.points.last().unwrap()));
    for (a, b, c) in f.inner_pieces() {
        acc.add(piece_l1(a, b, c).max(0.0));
    }
    acc.value()
}

/// Exponent of an `L^p` norm, `1 <= p <= ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PNorm {
    Finite(f64),
    Infinity,
}

impl PNorm {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(PNorm::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(PNorm::Finite(p))
        } else {
            Err(Error::InvalidP(p))
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            PNorm::Finite(p) => *p,
            PNorm::Infinity => f64::INFINITY,
        }
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(PNorm::Infinity);
        }
        let p: f64 = s.parse().map_err(|_| Error::Parse(format!("bad p value {s:?}")))?;
        PNorm::new(p)
    }
}

impl Serialize for PNorm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Parses a comma-separated list such as `1,2,inf`.
pub fn parse_p_list(s: &str) -> Result<Vec<PNorm>> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(str::parse).collect()
}

/// `||f||_p <= (||f||_∞^{p-1} ||f||_1)^{1/p}`.
pub fn lp_upper(linf: f64, l1: f64, p: PNorm) -> f64 {
    match p {
        PNorm::Infinity => linf,
        PNorm::Finite(p) if p == 1.0 => l1,
        PNorm::Finite(p) => (linf.powf(p - 1.0) * l1).powf(1.0 / p),
    }
}

/// Checked variant of [`lp_upper`] taking a raw exponent.
pub fn lp_upper_raw(linf: f64, l1: f64, p: f64) -> Result<f64> {
    Ok(lp_upper(linf, l1, PNorm::new(p)?))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut acc = CompensatedSum::new();
    acc.add(f(a) + f(b));
    for s in 1..m {
        let w = if s % 2 == 1 { 4.0 } else { 2.0 };
        acc.add(w * f(a + s as f64 * h));
    }
    acc.value() * h / 3.0
}

/// `||F - Φ||_p` by composite Simpson quadrature on each piece, split at the
/// crossing, over `[-8.5, 8.5]` widened to cover every jump.
pub fn lp_direct(f: &StepCdf, p: PNorm) -> f64 {
    let p = match p {
        PNorm::Infinity => return kolmogorov_distance(f),
        PNorm::Finite(p) => p,
    };
    const PER_PIECE: usize = 512;
    let lo = f.points[0].min(-QUADRATURE_HALF_WIDTH);
    let hi = f.points.last().unwrap().max(QUADRATURE_HALF_WIDTH);
    let mut pieces = vec![(lo, f.points[0], 0.0)];
    pieces.extend(f.inner_pieces());
    pieces.push((*f.points.last().unwrap(), hi, 1.0));
    let mut acc = CompensatedSum::new();
    for (a, b, c) in pieces {
        let g = |t: f64| (c - normal_cdf(t)).abs().powf(p);
        let t = if c > 0.0 && c < 1.0 { crossing(c) } else { f64::NAN };
        if t > a && t < b {
            acc.add(simpson(g, a, t, PER_PIECE) + simpson(g, t, b, PER_PIECE));
        } else {
            acc.add(simpson(g, a, b, PER_PIECE));
        }
    }
    acc.value().powf(1.0 / p)
}

/// Distances of one distribution function from `Φ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub linf: f64,
    pub l1: f64,
    /// Keyed by the exponent as written (`"2"`, `"inf"`).
    pub lp_upper: BTreeMap<String, f64>,
    pub exact: bool,
    /// Sample size when the law is empirical.
    pub samples: Option<usize>,
}

pub fn distance_report(f: &StepCdf, ps: &[PNorm], exact: bool, samples: Option<usize>) -> DistanceReport {
    let linf = kolmogorov_distance(f);
    let l1 = l1_distance(f);
    let lp_upper = ps.iter().map(|&p| (p.to_string(), lp_upper(linf, l1, p))).collect();
    DistanceReport { linf, l1, lp_upper, exact, samples }
}
