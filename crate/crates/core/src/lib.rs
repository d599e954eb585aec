//! Joint excursion probabilities of bivariate Gaussian random fields.
//!
//! The crate covers the full chain from special functions to verification:
//!
//! * [`specfun`]: gamma, modified Bessel `K_nu`, and the Matérn correlation
//!   with its cosine-integral representation.
//! * [`model`]: the bivariate Matérn cross-covariance model, its validity
//!   bound, assumption checks and local expansion constants.
//! * [`domain`] and [`fields`]: rectangle-union domains, grids, covariance
//!   assembly and deterministic Cholesky sampling (including the rescaled
//!   fractional Brownian motion used for Pickands functionals).
//! * [`pickands`]: Monte Carlo estimates of `H_alpha(S, T)`, `H_alpha(T)`
//!   and the Pickands constant.
//! * [`asymptotics`]: closed-form tail asymptotics and the Riemann-sum
//!   kernel `h(u)` behind them.
//! * [`montecarlo`]: brute-force joint exceedance probabilities and decay
//!   rate fitting.
//!
//! Everything stochastic is a pure function of `(seed, replicate_index)`, so
//! results do not depend on the size of the rayon thread pool.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Quadrature nodes are kept as published.
#![allow(clippy::excessive_precision)]

pub mod asymptotics;
pub mod domain;
mod error;
pub mod fields;
pub mod model;
pub mod montecarlo;
pub mod optimize;
pub mod pickands;
pub mod quad;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
