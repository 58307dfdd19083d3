//! Normal approximation for `Y = Σ_i e_{i π(i)}` when `π` is a uniformly
//! random fixed-point-free involution.
//!
//! The crate standardizes score arrays, enumerates and samples
//! involutions, builds the exchangeable pair and the zero-bias coupling
//! `W* = U W† + (1-U) W‡`, measures `L^∞`/`L^1`/`L^p` distances to the
//! standard normal, and evaluates the explicit bounds together with exact
//! oracles that check every identity on small `n`.

pub mod array;
pub mod bounds;
pub mod coupling;
pub mod distances;
pub mod error;
pub mod involution;
pub mod io;
pub mod montecarlo;
pub mod numeric;
pub mod stream;
pub mod verify;

pub use array::{
    beta_value, center_hat, moments, standardize, validate_and_symmetrize, CenteredArray, HatArray,
    MomentSummary, RawMatrix, ScoreArray, SymmetricArray,
};
pub use error::{Error, Result};
pub use involution::{enumerate_involutions, exact_w_distribution, sample_involution, y_value, Involution};
